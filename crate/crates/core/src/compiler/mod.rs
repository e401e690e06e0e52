//! From policy to flow rules.
//!
//! [`Compiler::build_selector`] expands a traffic profile into match fields,
//! [`select_path`] picks the switch sequence, and [`Compiler::compile`] emits
//! one rule per switch: forward along the path for route policies (with a
//! drop-band meter when rate limited), or a single log-and-drop rule at the
//! ingress switch for alerts.

mod path;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use path::{select_path, Hop, Path, PathError};

use crate::network::{FlowSpan, NetworkConfig, NetworkError};
use crate::policy::grammar::render_rate;
use crate::policy::{ApplicationRegistry, HostPair, OperationKind, Policy, Span, TrafficProfile, Transport};

/// Header fields of a concrete packet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PacketHeader {
    pub src_addr: String,
    pub dst_addr: String,
    pub transport: Transport,
    pub src_port: u16,
    pub dst_port: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchFields {
    pub src_host: String,
    pub dst_host: String,
    pub src_addr: String,
    pub dst_addr: String,
    pub transport: Transport,
    pub dst_port: u16,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub src_port: Option<u16>,
    /// Only set on switches a path crosses more than once.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub in_port: Option<u32>,
}

impl MatchFields {
    pub fn matches(&self, packet: &PacketHeader, in_port: u32) -> bool {
        self.src_addr == packet.src_addr
            && self.dst_addr == packet.dst_addr
            && self.transport == packet.transport
            && self.dst_port == packet.dst_port
            && self.src_port.is_none_or(|p| p == packet.src_port)
            && self.in_port.is_none_or(|p| p == in_port)
    }

    /// Fields for the return direction of a connection whose client used
    /// `client_port`.
    pub fn reversed(&self, client_port: u16) -> MatchFields {
        MatchFields {
            src_host: self.dst_host.clone(),
            dst_host: self.src_host.clone(),
            src_addr: self.dst_addr.clone(),
            dst_addr: self.src_addr.clone(),
            transport: self.transport,
            dst_port: client_port,
            src_port: Some(self.dst_port),
            in_port: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum RuleAction {
    ForwardToPort(u32),
    Drop,
    LogAndDrop,
}

impl fmt::Display for RuleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleAction::ForwardToPort(p) => write!(f, "forward:{p}"),
            RuleAction::Drop => f.write_str("drop"),
            RuleAction::LogAndDrop => f.write_str("log-drop"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum BandAction {
    Drop,
}

/// Rate limiter: traffic above `rate_bps` is dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeterSpec {
    pub rate_bps: u64,
    pub band: BandAction,
}

impl MeterSpec {
    pub fn drop_above(rate_bps: u64) -> Self {
        MeterSpec { rate_bps, band: BandAction::Drop }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowRule {
    pub switch: String,
    #[cfg_attr(feature = "serde", serde(rename = "match"))]
    pub match_fields: MatchFields,
    pub action: RuleAction,
    pub priority: u32,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub meter: Option<MeterSpec>,
}

impl fmt::Display for FlowRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.match_fields;
        write!(
            f,
            "{} pri={} match={}/{} {}->{} action={}",
            self.switch, self.priority, m.transport, m.dst_port, m.src_host, m.dst_host, self.action
        )?;
        if let Some(meter) = &self.meter {
            write!(f, " meter={}", render_rate(meter.rate_bps))?;
        }
        Ok(())
    }
}

/// The host pair a rule set is compiled for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlowEndpoints {
    pub src: String,
    pub dst: String,
    /// Client port; pins rules to one connection and enables return rules.
    pub src_port: Option<u16>,
}

impl FlowEndpoints {
    pub fn new(src: impl Into<String>, dst: impl Into<String>) -> Self {
        FlowEndpoints { src: src.into(), dst: dst.into(), src_port: None }
    }

    pub fn with_src_port(mut self, port: u16) -> Self {
        self.src_port = Some(port);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("unknown application `{0}`")]
    UnknownApplication(String),
    #[error("unknown host `{0}`")]
    UnknownHost(String),
    #[error("policy does not apply: {0}")]
    PolicyNotApplicable(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

impl From<NetworkError> for CompileError {
    fn from(e: NetworkError) -> Self {
        let NetworkError::NotFound(name) = e;
        CompileError::UnknownHost(name)
    }
}

/// Everything needed to install one flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub kind: OperationKind,
    /// `None` for alerts.
    pub path: Option<Path>,
    /// One rule per path switch, in path order.
    pub forward: Vec<FlowRule>,
    /// Return-direction twins, index-aligned with `forward`. Empty unless the
    /// client port is known.
    pub reverse: Vec<FlowRule>,
}

impl Plan {
    pub fn meter(&self) -> Option<MeterSpec> {
        self.forward.iter().find_map(|r| r.meter)
    }
}

/// Compiles policies against one network configuration.
#[derive(Clone, Copy, Debug)]
pub struct Compiler<'a> {
    pub config: &'a NetworkConfig,
    pub registry: &'a ApplicationRegistry,
}

impl<'a> Compiler<'a> {
    pub fn new(config: &'a NetworkConfig, registry: &'a ApplicationRegistry) -> Self {
        Compiler { config, registry }
    }

    pub fn build_selector(&self, profile: &TrafficProfile, src: &str, dst: &str) -> Result<MatchFields, CompileError> {
        let template = self
            .registry
            .template(&profile.application)
            .ok_or_else(|| CompileError::UnknownApplication(profile.application.clone()))?;
        let src_host = self.config.host(src)?;
        let dst_host = self.config.host(dst)?;
        Ok(MatchFields {
            src_host: src.into(),
            dst_host: dst.into(),
            src_addr: src_host.address.clone(),
            dst_addr: dst_host.address.clone(),
            transport: template.transport,
            dst_port: template.dst_port,
            src_port: None,
            in_port: None,
        })
    }

    /// Whether `policy` governs traffic between `src` and `dst`: the flow
    /// must stay in (or cross between) the policy's regions, in either
    /// direction, and the host pair must be inside the address space.
    pub fn check_applicable(&self, policy: &Policy, src: &str, dst: &str) -> Result<(), CompileError> {
        let span = self.config.classify_flow_span(src, dst)?;
        let (sr, dr) = (policy.source_region.as_str(), policy.destination_region.as_str());
        let span_ok = match (&span, policy.operation.span()) {
            (FlowSpan::IntraRegion(r), Span::Intra) => r == sr,
            (FlowSpan::InterRegion(a, b), Span::Inter) => (a == sr && b == dr) || (a == dr && b == sr),
            _ => false,
        };
        if !span_ok {
            return Err(CompileError::PolicyNotApplicable(alloc::format!(
                "flow {src}->{dst} is {span:?}, policy covers {sr}->{dr}"
            )));
        }
        if !policy.address_space.hosts.covers(&HostPair::new(src, dst)) {
            return Err(CompileError::PolicyNotApplicable(alloc::format!(
                "({src},{dst}) is outside the policy's address space"
            )));
        }
        Ok(())
    }

    pub fn select_path(&self, src: &str, dst: &str, policy: &Policy) -> Result<Path, CompileError> {
        Ok(select_path(&self.config.topology, src, dst, &policy.address_space.waypoints)?)
    }

    pub fn plan(&self, policy: &Policy, flow: &FlowEndpoints) -> Result<Plan, CompileError> {
        self.check_applicable(policy, &flow.src, &flow.dst)?;
        let mut selector = self.build_selector(&policy.profile, &flow.src, &flow.dst)?;
        selector.src_port = flow.src_port;
        let kind = policy.operation.kind();

        if kind == OperationKind::Alert {
            let ingress = self.config.host(&flow.src)?.attach.switch.clone();
            let rule = FlowRule {
                switch: ingress,
                match_fields: selector,
                action: RuleAction::LogAndDrop,
                priority: policy.priority,
                meter: None,
            };
            return Ok(Plan { kind, path: None, forward: alloc::vec![rule], reverse: Vec::new() });
        }

        let path = self.select_path(&flow.src, &flow.dst, policy)?;
        let meter = policy.rate_limit().map(MeterSpec::drop_above);
        let repeated = |switch: &str| path.switches().filter(|s| *s == switch).count() > 1;
        let mut forward = Vec::with_capacity(path.len());
        let mut reverse = Vec::new();
        for hop in &path.hops {
            let mut fields = selector.clone();
            let pinned = repeated(&hop.switch);
            if pinned {
                fields.in_port = Some(hop.ingress);
            }
            if let Some(client) = flow.src_port {
                let mut back = fields.reversed(client);
                if pinned {
                    back.in_port = Some(hop.egress);
                }
                reverse.push(FlowRule {
                    switch: hop.switch.clone(),
                    match_fields: back,
                    action: RuleAction::ForwardToPort(hop.ingress),
                    priority: policy.priority,
                    meter,
                });
            }
            forward.push(FlowRule {
                switch: hop.switch.clone(),
                match_fields: fields,
                action: RuleAction::ForwardToPort(hop.egress),
                priority: policy.priority,
                meter,
            });
        }
        Ok(Plan { kind, path: Some(path), forward, reverse })
    }

    /// Forward-direction rules for `flow` under `policy`.
    pub fn compile(&self, policy: &Policy, flow: &FlowEndpoints) -> Result<Vec<FlowRule>, CompileError> {
        self.plan(policy, flow).map(|p| p.forward)
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in self.forward.iter().chain(&self.reverse) {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
