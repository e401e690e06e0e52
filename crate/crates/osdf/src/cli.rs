//! `osdf` verbs. Results go to `out`, diagnostics to `err`.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error (bad policy, bad
//! file, unknown id, simulation failure).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use osdf_core::conflict::{detect_all, ConflictReport, Unchecked};
use osdf_core::sim::{DropReason, EventCounts, FlowId, Mode, ScriptStep, SimEvent, Simulator, ThroughputReport};
use osdf_core::{parse_policy_with, render_policy, ApplicationRegistry, NetworkConfig, PolicyId, PolicyStore};

use crate::export::write_jsonl;
use crate::files::{load_config, load_script, load_store, save_store};

#[derive(Parser, Debug)]
#[command(name = "osdf", version, about = "Intent-based SDN policy engine and flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Add, list or remove stored policies
    Policy {
        #[command(subcommand)]
        action: PolicyAction,
    },
    /// Same as `policy add`
    #[command(name = "policy-add")]
    PolicyAdd(AddArgs),
    /// Same as `policy list`
    #[command(name = "policy-list")]
    PolicyList(ListArgs),
    /// Same as `policy remove`
    #[command(name = "policy-remove")]
    PolicyRemove(RemoveArgs),
    /// Report pairwise policy conflicts with a suggested resolution
    Conflicts(ConflictArgs),
    /// Run a flow script against a network and print message counts and rates
    #[command(name = "sim-run")]
    SimRun(SimArgs),
    /// Print every switch's flow table after running a script
    #[command(name = "rules-dump")]
    RulesDump(DumpArgs),
}

#[derive(Subcommand, Debug)]
enum PolicyAction {
    Add(AddArgs),
    List(ListArgs),
    Remove(RemoveArgs),
}

#[derive(Args, Debug)]
struct AddArgs {
    /// Policy statement, e.g. "route WEB in A between (H1,H3)"
    statement: String,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ListArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RemoveArgs {
    /// Policy id, `3` or `P3`
    id: String,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ConflictArgs {
    #[arg(long)]
    store: PathBuf,
    /// Check that every host named by a policy exists in its regions
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Osdf,
    Reactive,
    Both,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    script: PathBuf,
    #[arg(long, value_enum, default_value = "osdf")]
    mode: ModeArg,
    #[arg(long)]
    json: bool,
    /// Write the event log as JSON lines (single mode only)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// A failure worth exit code 2.
struct Failure(String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let registry = ApplicationRegistry::default();
    let result = match cli.command {
        Command::Policy { action: PolicyAction::Add(a) } | Command::PolicyAdd(a) => policy_add(&registry, a, out),
        Command::Policy { action: PolicyAction::List(a) } | Command::PolicyList(a) => policy_list(&registry, a, out),
        Command::Policy { action: PolicyAction::Remove(a) } | Command::PolicyRemove(a) => {
            policy_remove(&registry, a, out)
        }
        Command::Conflicts(a) => conflicts(&registry, a, out),
        Command::SimRun(a) => {
            if a.log.is_some() && a.mode == ModeArg::Both {
                let _ = writeln!(err, "error: --log needs a single --mode (osdf or reactive)");
                return 1;
            }
            sim_run(&registry, a, out)
        }
        Command::RulesDump(a) => rules_dump(&registry, a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(message)) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

fn print_json(out: &mut dyn Write, value: &Value) -> Outcome {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_id(text: &str) -> Result<PolicyId, Failure> {
    let digits = text.strip_prefix(['P', 'p']).unwrap_or(text);
    digits.parse().map(PolicyId).map_err(|_| Failure(format!("bad policy id `{text}`")))
}

fn policy_add(registry: &ApplicationRegistry, a: AddArgs, out: &mut dyn Write) -> Outcome {
    let mut store = load_store(&a.store, registry)?;
    let policy = parse_policy_with(&a.statement, registry)?;
    let id = store.add(policy)?;
    save_store(&a.store, &store)?;
    let text = render_policy(store.get(id).unwrap());
    if a.json {
        print_json(out, &json!({ "id": id.0, "policy": text }))
    } else {
        writeln!(out, "{id}")?;
        Ok(())
    }
}

fn policy_list(registry: &ApplicationRegistry, a: ListArgs, out: &mut dyn Write) -> Outcome {
    let store = load_store(&a.store, registry)?;
    if a.json {
        let items: Vec<Value> = store.iter().map(|(id, p)| json!({ "id": id.0, "policy": render_policy(p) })).collect();
        return print_json(out, &Value::Array(items));
    }
    for (id, p) in store.iter() {
        writeln!(out, "{id} {}", render_policy(p))?;
    }
    Ok(())
}

fn policy_remove(registry: &ApplicationRegistry, a: RemoveArgs, out: &mut dyn Write) -> Outcome {
    let id = parse_id(&a.id)?;
    let mut store = load_store(&a.store, registry)?;
    let removed = store.remove(id)?;
    save_store(&a.store, &store)?;
    if a.json {
        print_json(out, &json!({ "removed": id.0, "policy": render_policy(&removed) }))
    } else {
        writeln!(out, "removed {id}")?;
        Ok(())
    }
}

fn report_json(r: &ConflictReport) -> Value {
    json!({
        "first": r.first.0,
        "second": r.second.0,
        "class": r.class.to_string(),
        "resolution": r.resolution.to_string(),
        "lossy": r.resolution.is_lossy(),
    })
}

fn conflicts(registry: &ApplicationRegistry, a: ConflictArgs, out: &mut dyn Write) -> Outcome {
    let store = load_store(&a.store, registry)?;
    let reports = match &a.config {
        Some(path) => detect_all(&store, &load_config(path)?)?,
        None => detect_all(&store, &Unchecked)?,
    };
    if a.json {
        return print_json(out, &Value::Array(reports.iter().map(report_json).collect()));
    }
    if reports.is_empty() {
        writeln!(out, "no conflicts")?;
    }
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

fn simulate(
    config: &NetworkConfig,
    registry: &ApplicationRegistry,
    store: &PolicyStore,
    steps: &[ScriptStep],
    mode: Mode,
) -> Result<Simulator, Failure> {
    let mut sim = Simulator::new(config.clone(), registry.clone(), store.clone());
    sim.run_script(steps, mode)?;
    Ok(sim)
}

enum Status {
    Active,
    Dropped(DropReason),
}

/// Where each injected flow ended up, by scanning the log.
fn statuses(sim: &Simulator) -> BTreeMap<FlowId, Status> {
    let mut status = BTreeMap::new();
    for e in sim.log() {
        match &e.event {
            SimEvent::FlowAdmitted { flow, .. } | SimEvent::FlowRerouted { flow, .. } => {
                status.insert(*flow, Status::Active);
            }
            SimEvent::FlowDropped { flow, reason } => {
                status.insert(*flow, Status::Dropped(*reason));
            }
            _ => {}
        }
    }
    status
}

fn mbps(bps: f64) -> String {
    format!("{:.3}", bps / 1e6)
}

fn counts_json(c: &EventCounts) -> Value {
    json!({
        "packet_ins": c.packet_ins,
        "rule_installs": c.rule_installs,
        "rule_removes": c.rule_removes,
        "admitted": c.admitted,
        "dropped": c.dropped,
        "alerts": c.alerts,
        "rerouted": c.rerouted,
    })
}

fn flows_json(sim: &Simulator, report: &ThroughputReport) -> Value {
    let status = statuses(sim);
    let flows = sim
        .requests()
        .iter()
        .map(|(id, req)| {
            let mut v = json!({
                "flow": id.0,
                "src": req.src,
                "dst": req.dst,
                "transport": req.transport,
                "dst_port": req.dst_port,
                "src_port": req.src_port,
            });
            match (status.get(id), sim.active_flows().get(id)) {
                (Some(Status::Active), Some(active)) => {
                    v["policy"] = json!(active.policy.0);
                    v["path"] = json!(active.path.nodes());
                    v["rate_bps"] = json!(report.rate(*id));
                }
                (Some(Status::Dropped(reason)), _) => v["dropped"] = json!(reason),
                _ => {}
            }
            v
        })
        .collect();
    Value::Array(flows)
}

fn write_flows(sim: &Simulator, report: &ThroughputReport, out: &mut dyn Write) -> io::Result<()> {
    let status = statuses(sim);
    for (id, req) in sim.requests() {
        let head = format!("{id} {}->{} {}/{}", req.src, req.dst, req.transport, req.dst_port);
        match (status.get(id), sim.active_flows().get(id)) {
            (Some(Status::Active), Some(active)) => writeln!(
                out,
                "{head} by {} via {} rate={} Mbps",
                active.policy,
                active.path,
                mbps(report.rate(*id).unwrap_or(0.0))
            )?,
            (Some(Status::Dropped(reason)), _) => writeln!(out, "{head} dropped ({reason})")?,
            _ => writeln!(out, "{head} pending")?,
        }
    }
    Ok(())
}

fn sim_run(registry: &ApplicationRegistry, a: SimArgs, out: &mut dyn Write) -> Outcome {
    let config = load_config(&a.config)?;
    let store = load_store(&a.store, registry)?;
    let steps = load_script(&a.script)?;
    let modes: &[Mode] = match a.mode {
        ModeArg::Osdf => &[Mode::OsdfPreinstall],
        ModeArg::Reactive => &[Mode::ReactiveBaseline],
        ModeArg::Both => &[Mode::OsdfPreinstall, Mode::ReactiveBaseline],
    };
    let runs = modes
        .iter()
        .map(|&mode| simulate(&config, registry, &store, &steps, mode).map(|sim| (mode, sim)))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(path) = &a.log {
        write_log(path, runs[0].1.log())?;
    }

    if a.json {
        let items: Vec<Value> = runs
            .iter()
            .map(|(mode, sim)| {
                let report = sim.solve_throughput();
                json!({
                    "mode": mode,
                    "counts": counts_json(&EventCounts::of(sim.log())),
                    "flows": flows_json(sim, &report),
                    "links": report.links,
                })
            })
            .collect();
        return print_json(out, &json!({ "runs": items }));
    }

    writeln!(
        out,
        "{:<10}{:>12}{:>15}{:>10}{:>9}{:>10}",
        "mode", "packet-ins", "rule-installs", "admitted", "dropped", "rerouted"
    )?;
    for (mode, sim) in &runs {
        let c = EventCounts::of(sim.log());
        writeln!(
            out,
            "{:<10}{:>12}{:>15}{:>10}{:>9}{:>10}",
            mode.to_string(),
            c.packet_ins,
            c.rule_installs,
            c.admitted,
            c.dropped,
            c.rerouted
        )?;
    }
    // Flow outcomes and rates do not depend on the mode.
    let sim = &runs[0].1;
    writeln!(out)?;
    write_flows(sim, &sim.solve_throughput(), out)?;
    Ok(())
}

fn write_log(path: &Path, log: &[osdf_core::sim::LoggedEvent]) -> Outcome {
    let file = File::create(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_jsonl(log, &mut w)?;
    w.flush()?;
    Ok(())
}

fn rules_dump(registry: &ApplicationRegistry, a: DumpArgs, out: &mut dyn Write) -> Outcome {
    let config = load_config(&a.config)?;
    let store = load_store(&a.store, registry)?;
    let steps = match &a.script {
        Some(path) => load_script(path)?,
        None => Vec::new(),
    };
    let sim = simulate(&config, registry, &store, &steps, Mode::OsdfPreinstall)?;
    let tables = sim.flow_tables();
    if a.json {
        return print_json(out, &serde_json::to_value(&tables)?);
    }
    for rule in tables.values().flatten() {
        writeln!(out, "{rule}")?;
    }
    Ok(())
}
