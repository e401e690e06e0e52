//! Flow-level simulator.
//!
//! Switches hold priority-ordered flow tables. A flow's first packet walks
//! the data plane from its source host; every table miss raises a packet-in
//! to the controller, which picks the winning policy and installs rules. In
//! [`Mode::OsdfPreinstall`] the whole path is installed on the first
//! packet-in; in [`Mode::ReactiveBaseline`] only the switch that asked, so a
//! flow costs one packet-in per switch. Time is the event sequence number.

mod fluid;
mod scenario;
mod table;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use fluid::{max_min, FluidFlow};
pub use scenario::{run_scenario, FlowStep, ScriptStep, StepOp};
pub use table::SwitchState;

use crate::compiler::{Compiler, FlowEndpoints, FlowRule, PacketHeader, Path, Plan, RuleAction};
use crate::network::{NetworkConfig, PortRef, PortUse};
use crate::policy::{ApplicationRegistry, OperationKind, Policy, PolicyError, PolicyId, Transport};
use crate::store::{PolicyStore, StoreError};

/// First ephemeral port handed to clients.
pub const EPHEMERAL_BASE: u16 = 49152;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct FlowId(pub u64);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Mode {
    OsdfPreinstall,
    ReactiveBaseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OsdfPreinstall => "osdf",
            Mode::ReactiveBaseline => "reactive",
        })
    }
}

/// The first packet of a flow, plus its offered load.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowRequest {
    pub src: String,
    pub dst: String,
    pub transport: Transport,
    pub dst_port: u16,
    pub demand_bps: u64,
    /// Assigned from the ephemeral range when absent.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub src_port: Option<u16>,
}

impl FlowRequest {
    pub fn new(
        src: impl Into<String>,
        dst: impl Into<String>,
        transport: Transport,
        dst_port: u16,
        demand_bps: u64,
    ) -> Self {
        FlowRequest { src: src.into(), dst: dst.into(), transport, dst_port, demand_bps, src_port: None }
    }

    /// A request for a registered application's port.
    pub fn for_app(
        registry: &ApplicationRegistry,
        app: &str,
        src: impl Into<String>,
        dst: impl Into<String>,
        demand_bps: u64,
    ) -> Option<Self> {
        let t = registry.template(app)?;
        Some(FlowRequest::new(src, dst, t.transport, t.dst_port, demand_bps))
    }

    fn same_connection(&self, other: &FlowRequest) -> bool {
        self.src == other.src
            && self.dst == other.dst
            && self.transport == other.transport
            && self.dst_port == other.dst_port
            && self.src_port == other.src_port
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum DropReason {
    NoPolicy,
    AlertPolicy,
    TableOverflow,
    NoRoute,
    /// Hit a drop rule already in a table.
    Blocked,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::NoPolicy => "no-policy",
            DropReason::AlertPolicy => "alert",
            DropReason::TableOverflow => "table-overflow",
            DropReason::NoRoute => "no-route",
            DropReason::Blocked => "blocked",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "event", rename_all = "snake_case")
)]
pub enum SimEvent {
    PacketIn {
        switch: String,
        flow: FlowId,
    },
    /// One forward rule, with its return-direction twin.
    RuleInstall {
        switch: String,
        flow: FlowId,
        rule: Box<FlowRule>,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        reverse: Option<Box<FlowRule>>,
    },
    RuleRemove {
        switch: String,
        flow: FlowId,
        entries: usize,
    },
    AlertLogged {
        flow: FlowId,
        policy: PolicyId,
    },
    FlowAdmitted {
        flow: FlowId,
        policy: PolicyId,
        path: Vec<String>,
    },
    FlowRerouted {
        flow: FlowId,
        policy: PolicyId,
        path: Vec<String>,
    },
    FlowDropped {
        flow: FlowId,
        reason: DropReason,
    },
    PolicyAdded {
        policy: PolicyId,
    },
    PolicyRemoved {
        policy: PolicyId,
    },
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEvent::PacketIn { switch, flow } => write!(f, "packet-in {switch} {flow}"),
            SimEvent::RuleInstall { rule, flow, .. } => write!(f, "install {flow} {rule}"),
            SimEvent::RuleRemove { switch, flow, entries } => write!(f, "remove {flow} {switch} ({entries} entries)"),
            SimEvent::AlertLogged { flow, policy } => write!(f, "alert {flow} by {policy}"),
            SimEvent::FlowAdmitted { flow, policy, path } => {
                write!(f, "admit {flow} by {policy} via {}", path.join(","))
            }
            SimEvent::FlowRerouted { flow, policy, path } => {
                write!(f, "reroute {flow} by {policy} via {}", path.join(","))
            }
            SimEvent::FlowDropped { flow, reason } => write!(f, "drop {flow} ({reason})"),
            SimEvent::PolicyAdded { policy } => write!(f, "add {policy}"),
            SimEvent::PolicyRemoved { policy } => write!(f, "remove {policy}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoggedEvent {
    pub seq: u64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub event: SimEvent,
}

/// Message totals over a slice of the log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub packet_ins: usize,
    pub rule_installs: usize,
    pub rule_removes: usize,
    pub admitted: usize,
    pub dropped: usize,
    pub alerts: usize,
    pub rerouted: usize,
}

impl EventCounts {
    pub fn of(log: &[LoggedEvent]) -> Self {
        let mut c = EventCounts::default();
        for e in log {
            match e.event {
                SimEvent::PacketIn { .. } => c.packet_ins += 1,
                SimEvent::RuleInstall { .. } => c.rule_installs += 1,
                SimEvent::RuleRemove { .. } => c.rule_removes += 1,
                SimEvent::AlertLogged { .. } => c.alerts += 1,
                SimEvent::FlowAdmitted { .. } => c.admitted += 1,
                SimEvent::FlowRerouted { .. } => c.rerouted += 1,
                SimEvent::FlowDropped { .. } => c.dropped += 1,
                SimEvent::PolicyAdded { .. } | SimEvent::PolicyRemoved { .. } => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("unknown host `{0}`")]
    UnknownHost(String),
    #[error("flow demand must be positive")]
    ZeroDemand,
    #[error("connection {0} is already active")]
    DuplicateConnection(String),
    #[error("no free client port for {0}")]
    PortsExhausted(String),
    #[error("flow table of {switch} is full; {flow} rejected")]
    TableOverflow { flow: FlowId, switch: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("script step {index}: {message}")]
    BadStep { index: usize, message: String },
}

#[derive(Clone, Debug)]
pub enum PolicyChange {
    Add(Policy),
    Remove(PolicyId),
}

/// An admitted flow and what it is riding on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveFlow {
    pub request: FlowRequest,
    pub policy: PolicyId,
    pub path: Path,
    pub meter_bps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowRate {
    pub rate_bps: f64,
    /// min(demand, meter).
    pub cap_bps: f64,
    /// Directed links crossed, named as in [`ThroughputReport::links`].
    pub links: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkLoad {
    pub capacity_bps: f64,
    pub allocated_bps: f64,
}

/// Steady-state rates of all admitted flows.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThroughputReport {
    pub flows: BTreeMap<FlowId, FlowRate>,
    /// Keyed `S1:2->S2:1`, `H1->S1:1` or `S1:1->H1`; only links in use.
    pub links: BTreeMap<String, LinkLoad>,
}

impl ThroughputReport {
    pub fn rate(&self, flow: FlowId) -> Option<f64> {
        self.flows.get(&flow).map(|f| f.rate_bps)
    }
}

pub struct Simulator {
    config: NetworkConfig,
    registry: ApplicationRegistry,
    store: PolicyStore,
    switches: BTreeMap<String, SwitchState>,
    flows: BTreeMap<FlowId, ActiveFlow>,
    requests: BTreeMap<FlowId, FlowRequest>,
    log: Vec<LoggedEvent>,
    next_flow: u64,
    next_port: u32,
    install_seq: u64,
}

enum Walk {
    Delivered,
    Dropped(DropReason),
}

impl Simulator {
    pub fn new(config: NetworkConfig, registry: ApplicationRegistry, store: PolicyStore) -> Self {
        let switches = config
            .topology
            .switches()
            .map(|s| (s.into(), SwitchState::new(s, config.defaults.table_capacity)))
            .collect();
        Simulator {
            config,
            registry,
            store,
            switches,
            flows: BTreeMap::new(),
            requests: BTreeMap::new(),
            log: Vec::new(),
            next_flow: 1,
            next_port: 0,
            install_seq: 0,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn registry(&self) -> &ApplicationRegistry {
        &self.registry
    }

    pub fn store(&self) -> &PolicyStore {
        &self.store
    }

    pub fn log(&self) -> &[LoggedEvent] {
        &self.log
    }

    pub fn log_since(&self, mark: usize) -> &[LoggedEvent] {
        &self.log[mark..]
    }

    pub fn switch(&self, id: &str) -> Option<&SwitchState> {
        self.switches.get(id)
    }

    /// Every injected request, admitted or not, with its client port.
    pub fn requests(&self) -> &BTreeMap<FlowId, FlowRequest> {
        &self.requests
    }

    pub fn active_flows(&self) -> &BTreeMap<FlowId, ActiveFlow> {
        &self.flows
    }

    /// Every switch's rules in lookup order.
    pub fn flow_tables(&self) -> BTreeMap<String, Vec<FlowRule>> {
        self.switches.iter().map(|(id, s)| (id.clone(), s.rules().cloned().collect())).collect()
    }

    fn emit(&mut self, event: SimEvent) {
        let seq = self.log.len() as u64 + 1;
        self.log.push(LoggedEvent { seq, event });
    }

    fn compiler(&self) -> Compiler<'_> {
        Compiler::new(&self.config, &self.registry)
    }

    /// The applicable policy with the highest priority; lowest id on ties.
    pub fn winning_policy(&self, req: &FlowRequest) -> Option<(PolicyId, &Policy)> {
        let app = self.registry.application_for(req.transport, req.dst_port)?;
        let compiler = self.compiler();
        self.store
            .iter()
            .filter(|(_, p)| p.profile.application == app)
            .filter(|(_, p)| compiler.check_applicable(p, &req.src, &req.dst).is_ok())
            .max_by(|(ia, a), (ib, b)| a.priority.cmp(&b.priority).then(ib.cmp(ia)))
    }

    fn allocate_port(&mut self, req: &FlowRequest) -> Result<u16, SimError> {
        const RANGE: u32 = (u16::MAX - EPHEMERAL_BASE) as u32 + 1;
        for _ in 0..RANGE {
            let port = EPHEMERAL_BASE + (self.next_port % RANGE) as u16;
            self.next_port = self.next_port.wrapping_add(1);
            let candidate = FlowRequest { src_port: Some(port), ..req.clone() };
            if !self.flows.values().any(|f| f.request.same_connection(&candidate)) {
                return Ok(port);
            }
        }
        Err(SimError::PortsExhausted(format!("{}->{}", req.src, req.dst)))
    }

    /// Injects a flow's first packet and lets the controller react.
    ///
    /// A dropped flow still returns `Ok`; only a table overflow is an error,
    /// and it is logged before returning.
    pub fn inject_flow(&mut self, req: FlowRequest, mode: Mode) -> Result<FlowId, SimError> {
        if req.demand_bps == 0 {
            return Err(SimError::ZeroDemand);
        }
        for host in [&req.src, &req.dst] {
            if self.config.host(host).is_err() {
                return Err(SimError::UnknownHost(host.clone()));
            }
        }
        let mut req = req;
        match req.src_port {
            Some(_) => {
                if self.flows.values().any(|f| f.request.same_connection(&req)) {
                    return Err(SimError::DuplicateConnection(format!(
                        "{}:{}->{}:{}",
                        req.src,
                        req.src_port.unwrap(),
                        req.dst,
                        req.dst_port
                    )));
                }
            }
            None => req.src_port = Some(self.allocate_port(&req)?),
        }
        let flow = FlowId(self.next_flow);
        self.next_flow += 1;
        self.requests.insert(flow, req.clone());

        let src = self.config.host(&req.src).unwrap();
        let packet = PacketHeader {
            src_addr: src.address.clone(),
            dst_addr: self.config.host(&req.dst).unwrap().address.clone(),
            transport: req.transport,
            src_port: req.src_port.unwrap(),
            dst_port: req.dst_port,
        };
        let mut at = src.attach.clone();
        let mut decision: Option<(PolicyId, Plan, Vec<bool>)> = None;
        let mut overflow = None;
        // A packet never needs more steps than hops it may take plus misses.
        let mut budget = 4 * self.switches.len() + 4;

        let outcome = loop {
            if budget == 0 {
                break Walk::Dropped(DropReason::NoRoute);
            }
            budget -= 1;
            let hit = self.switches[&at.switch].lookup(&packet, at.port).map(|r| r.action);
            match hit {
                Some(RuleAction::ForwardToPort(p)) => {
                    let out = PortRef::new(at.switch.clone(), p);
                    match self.config.topology.port(&out) {
                        Some(PortUse::Link(i)) => at = self.config.topology.links()[*i].peer_of(&out).unwrap().clone(),
                        Some(PortUse::Host(h)) if *h == req.dst => break Walk::Delivered,
                        _ => break Walk::Dropped(DropReason::NoRoute),
                    }
                }
                Some(RuleAction::Drop) | Some(RuleAction::LogAndDrop) => break Walk::Dropped(DropReason::Blocked),
                None => {
                    self.emit(SimEvent::PacketIn { switch: at.switch.clone(), flow });
                    if decision.is_none() {
                        let Some((pid, policy)) = self.winning_policy(&req) else {
                            break Walk::Dropped(DropReason::NoPolicy);
                        };
                        let endpoints = FlowEndpoints::new(&req.src, &req.dst).with_src_port(packet.src_port);
                        let plan = match self.compiler().plan(policy, &endpoints) {
                            Ok(plan) => plan,
                            Err(_) => break Walk::Dropped(DropReason::NoRoute),
                        };
                        if let Some(switch) = self.first_full_switch(&plan) {
                            overflow = Some(switch);
                            break Walk::Dropped(DropReason::TableOverflow);
                        }
                        if plan.kind == OperationKind::Alert {
                            self.install_hop(flow, &plan, 0);
                            self.emit(SimEvent::AlertLogged { flow, policy: pid });
                            break Walk::Dropped(DropReason::AlertPolicy);
                        }
                        let installed = vec![false; plan.forward.len()];
                        decision = Some((pid, plan, installed));
                    }
                    let (_, plan, installed) = decision.as_mut().unwrap();
                    let path = plan.path.as_ref().unwrap();
                    let wanted: Vec<usize> = match mode {
                        Mode::OsdfPreinstall => (0..installed.len()).filter(|&k| !installed[k]).collect(),
                        Mode::ReactiveBaseline => path
                            .hops
                            .iter()
                            .enumerate()
                            .filter(|(k, h)| !installed[*k] && h.switch == at.switch && h.ingress == at.port)
                            .map(|(k, _)| k)
                            .take(1)
                            .collect(),
                    };
                    if wanted.is_empty() {
                        break Walk::Dropped(DropReason::NoRoute);
                    }
                    for &k in &wanted {
                        installed[k] = true;
                    }
                    let plan = plan.clone();
                    for k in wanted {
                        self.install_hop(flow, &plan, k);
                    }
                }
            }
        };

        match outcome {
            Walk::Delivered => {
                let (policy, plan, _) = decision.expect("delivery implies a controller decision");
                let path = plan.path.clone().unwrap();
                self.emit(SimEvent::FlowAdmitted { flow, policy, path: path.nodes() });
                let meter_bps = plan.forward.iter().filter_map(|r| r.meter.map(|m| m.rate_bps)).min();
                self.flows.insert(flow, ActiveFlow { request: req, policy, path, meter_bps });
                Ok(flow)
            }
            Walk::Dropped(reason) => {
                if reason != DropReason::AlertPolicy {
                    self.uninstall(flow, None);
                }
                self.emit(SimEvent::FlowDropped { flow, reason });
                match overflow {
                    Some(switch) => Err(SimError::TableOverflow { flow, switch }),
                    None => Ok(flow),
                }
            }
        }
    }

    /// Entries a plan needs per switch, checked before anything is installed.
    fn first_full_switch(&self, plan: &Plan) -> Option<String> {
        let mut need: BTreeMap<&str, usize> = BTreeMap::new();
        for rule in plan.forward.iter().chain(&plan.reverse) {
            *need.entry(rule.switch.as_str()).or_default() += 1;
        }
        need.into_iter().find(|(s, n)| self.switches[*s].free() < *n).map(|(s, _)| s.into())
    }

    fn install_hop(&mut self, flow: FlowId, plan: &Plan, k: usize) {
        let rule = plan.forward[k].clone();
        let reverse = plan.reverse.get(k).cloned();
        let table = self.switches.get_mut(&rule.switch).unwrap();
        for r in core::iter::once(&rule).chain(reverse.as_ref()) {
            self.install_seq += 1;
            table.install(r.clone(), flow, self.install_seq).expect("capacity checked before install");
        }
        self.emit(SimEvent::RuleInstall {
            switch: rule.switch.clone(),
            flow,
            rule: Box::new(rule),
            reverse: reverse.map(Box::new),
        });
    }

    /// Removes a flow's rules, logging per switch when `path` is given.
    fn uninstall(&mut self, flow: FlowId, path: Option<&Path>) {
        match path {
            None => {
                for table in self.switches.values_mut() {
                    table.remove_flow(flow);
                }
            }
            Some(path) => {
                let mut seen = BTreeSet::new();
                for switch in path.switches() {
                    if !seen.insert(switch) {
                        continue;
                    }
                    let removed = self.switches.get_mut(switch).unwrap().remove_flow(flow).len();
                    if removed > 0 {
                        self.emit(SimEvent::RuleRemove { switch: switch.into(), flow, entries: removed });
                    }
                }
            }
        }
    }

    /// Adds or removes a policy, then moves every admitted flow whose winning
    /// policy changed. Returns the id of an added policy.
    pub fn apply_policy_change(&mut self, change: PolicyChange) -> Result<Option<PolicyId>, SimError> {
        let added = match change {
            PolicyChange::Add(policy) => {
                let id = self.store.add(policy)?;
                self.emit(SimEvent::PolicyAdded { policy: id });
                Some(id)
            }
            PolicyChange::Remove(id) => {
                self.store.remove(id)?;
                self.emit(SimEvent::PolicyRemoved { policy: id });
                None
            }
        };
        let ids: Vec<FlowId> = self.flows.keys().copied().collect();
        for flow in ids {
            let current = self.flows[&flow].policy;
            let winner = self.winning_policy(&self.flows[&flow].request).map(|(id, _)| id);
            if winner == Some(current) {
                continue;
            }
            let old = self.flows.remove(&flow).unwrap();
            self.uninstall(flow, Some(&old.path));
            let Some(pid) = winner else {
                self.emit(SimEvent::FlowDropped { flow, reason: DropReason::NoPolicy });
                continue;
            };
            let endpoints =
                FlowEndpoints::new(&old.request.src, &old.request.dst).with_src_port(old.request.src_port.unwrap());
            let plan = match self.compiler().plan(self.store.get(pid).unwrap(), &endpoints) {
                Ok(plan) => plan,
                Err(_) => {
                    self.emit(SimEvent::FlowDropped { flow, reason: DropReason::NoRoute });
                    continue;
                }
            };
            if self.first_full_switch(&plan).is_some() {
                self.emit(SimEvent::FlowDropped { flow, reason: DropReason::TableOverflow });
                continue;
            }
            for k in 0..plan.forward.len() {
                self.install_hop(flow, &plan, k);
            }
            if plan.kind == OperationKind::Alert {
                self.emit(SimEvent::AlertLogged { flow, policy: pid });
                self.emit(SimEvent::FlowDropped { flow, reason: DropReason::AlertPolicy });
                continue;
            }
            let path = plan.path.clone().unwrap();
            self.emit(SimEvent::FlowRerouted { flow, policy: pid, path: path.nodes() });
            let meter_bps = plan.forward.iter().filter_map(|r| r.meter.map(|m| m.rate_bps)).min();
            self.flows.insert(flow, ActiveFlow { request: old.request, policy: pid, path, meter_bps });
        }
        Ok(added)
    }

    fn link_name(&self, out: &PortRef) -> (String, u64) {
        match self.config.topology.port(out) {
            Some(PortUse::Link(i)) => {
                let link = &self.config.topology.links()[*i];
                (format!("{out}->{}", link.peer_of(out).unwrap()), link.capacity_bps)
            }
            Some(PortUse::Host(h)) => (format!("{out}->{h}"), self.config.defaults.link_capacity_bps),
            None => (format!("{out}->?"), 0),
        }
    }

    /// Max-min fair rates over directed link capacities, each flow capped at
    /// its demand and its tightest meter.
    pub fn solve_throughput(&self) -> ThroughputReport {
        let mut names: BTreeMap<String, usize> = BTreeMap::new();
        let mut capacities: Vec<f64> = Vec::new();
        let mut intern = |name: String, cap: u64| -> usize {
            *names.entry(name).or_insert_with(|| {
                capacities.push(cap as f64);
                capacities.len() - 1
            })
        };
        let mut fluid = Vec::with_capacity(self.flows.len());
        let mut crossed = Vec::with_capacity(self.flows.len());
        for active in self.flows.values() {
            let host = self.config.host(&active.request.src).unwrap();
            let mut links = Vec::with_capacity(active.path.len() + 1);
            links.push((format!("{}->{}", host.name, host.attach), self.config.defaults.link_capacity_bps));
            for hop in &active.path.hops {
                links.push(self.link_name(&PortRef::new(hop.switch.clone(), hop.egress)));
            }
            let resources = links.iter().map(|(n, c)| intern(n.clone(), *c)).collect();
            let cap = active.meter_bps.map_or(active.request.demand_bps, |m| m.min(active.request.demand_bps));
            fluid.push(FluidFlow { resources, cap: cap as f64 });
            crossed.push(links.into_iter().map(|(n, _)| n).collect::<Vec<_>>());
        }
        let rates = max_min(&capacities, &fluid);

        let mut allocated = vec![0.0; capacities.len()];
        for (f, flow) in fluid.iter().enumerate() {
            for &r in &flow.resources {
                allocated[r] += rates[f];
            }
        }
        let links = names
            .into_iter()
            .map(|(name, r)| (name, LinkLoad { capacity_bps: capacities[r], allocated_bps: allocated[r] }))
            .collect();
        let flows = self
            .flows
            .keys()
            .zip(crossed)
            .enumerate()
            .map(|(f, (id, links))| (*id, FlowRate { rate_bps: rates[f], cap_bps: fluid[f].cap, links }))
            .collect();
        ThroughputReport { flows, links }
    }
}
