//! Scripted runs: flows and policy changes applied in `at` order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{FlowRequest, LoggedEvent, Mode, PolicyChange, SimError, Simulator, ThroughputReport};
use crate::network::NetworkConfig;
use crate::policy::{parse_policy_with, ApplicationRegistry, PolicyId, Transport};
use crate::store::PolicyStore;

fn default_demand_mbps() -> u64 {
    1000
}

/// A flow start. Give either `app` or `transport` plus `dst_port`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowStep {
    pub src: String,
    pub dst: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub app: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub transport: Option<Transport>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub dst_port: Option<u16>,
    #[cfg_attr(feature = "serde", serde(default = "default_demand_mbps"))]
    pub demand_mbps: u64,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub src_port: Option<u16>,
}

impl FlowStep {
    pub fn app(app: &str, src: &str, dst: &str) -> Self {
        FlowStep {
            src: src.into(),
            dst: dst.into(),
            app: Some(app.into()),
            transport: None,
            dst_port: None,
            demand_mbps: default_demand_mbps(),
            src_port: None,
        }
    }

    fn request(&self, registry: &ApplicationRegistry) -> Result<FlowRequest, String> {
        let (transport, dst_port) = match (&self.app, self.transport, self.dst_port) {
            (Some(app), None, None) => {
                let t = registry.template(app).ok_or_else(|| format!("unknown application `{app}`"))?;
                (t.transport, t.dst_port)
            }
            (None, Some(t), Some(p)) => (t, p),
            _ => return Err("a flow needs either `app` or both `transport` and `dst_port`".into()),
        };
        let demand_bps = self.demand_mbps.checked_mul(1_000_000).ok_or("demand out of range")?;
        Ok(FlowRequest {
            src: self.src.clone(),
            dst: self.dst.clone(),
            transport,
            dst_port,
            demand_bps,
            src_port: self.src_port,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "op", rename_all = "snake_case")
)]
pub enum StepOp {
    Flow(FlowStep),
    AddPolicy { policy: String },
    RemovePolicy { id: PolicyId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScriptStep {
    #[cfg_attr(feature = "serde", serde(default))]
    pub at: u64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub op: StepOp,
}

impl Simulator {
    /// Runs steps in `at` order (stable for equal stamps). Table overflows
    /// reject the flow and the run goes on; other errors stop it.
    pub fn run_script(&mut self, steps: &[ScriptStep], mode: Mode) -> Result<(), SimError> {
        let mut order: Vec<usize> = (0..steps.len()).collect();
        order.sort_by_key(|&i| steps[i].at);
        for index in order {
            let bad = |message: String| SimError::BadStep { index, message };
            match &steps[index].op {
                StepOp::Flow(step) => {
                    let req = step.request(self.registry()).map_err(bad)?;
                    match self.inject_flow(req, mode) {
                        Ok(_) | Err(SimError::TableOverflow { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                StepOp::AddPolicy { policy } => {
                    let policy = parse_policy_with(policy, self.registry())?;
                    self.apply_policy_change(PolicyChange::Add(policy))?;
                }
                StepOp::RemovePolicy { id } => {
                    self.apply_policy_change(PolicyChange::Remove(*id))?;
                }
            }
        }
        Ok(())
    }
}

/// Fresh simulator, whole script, final rates.
pub fn run_scenario(
    config: &NetworkConfig,
    registry: &ApplicationRegistry,
    policies: &PolicyStore,
    steps: &[ScriptStep],
    mode: Mode,
) -> Result<(Vec<LoggedEvent>, ThroughputReport), SimError> {
    let mut sim = Simulator::new(config.clone(), registry.clone(), policies.clone());
    sim.run_script(steps, mode)?;
    let report = sim.solve_throughput();
    Ok((sim.log().to_vec(), report))
}
