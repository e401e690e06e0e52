//! Application policies.
//!
//! A [`Policy`] is one administrator intent: which operation to perform
//! (route, alert, or route with rate limiting; inside one region or between
//! two), for which application traffic, with what priority, and for which
//! hosts and waypoints. Policies are written in a small keyword grammar, see
//! [`parse_policy`] and [`render_policy`].

mod address;
pub(crate) mod grammar;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use address::{AddressSpace, Difference, HostPair, HostSpace, Waypoint};
pub use grammar::{parse_policy, parse_policy_with, render_policy, ParseError, PolicyError, SemanticError};

/// Priority given to policies that do not state one.
pub const DEFAULT_PRIORITY: u32 = 10;

/// Identifier of a policy inside a [`crate::PolicyStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct PolicyId(pub u64);

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Route or alert.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OperationKind {
    Route,
    Alert,
}

/// Whether a policy applies inside one region or between two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Span {
    Intra,
    Inter,
}

/// The coarse class used to filter policies by type of service.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperationClass {
    pub kind: OperationKind,
    pub span: Span,
}

/// The six high-level network operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NetworkOperation {
    IntraSiteRoute,
    InterSiteRoute,
    IntraSiteAlert,
    InterSiteAlert,
    IntraSiteRouteQoS,
    InterSiteRouteQoS,
}

impl NetworkOperation {
    pub const ALL: [NetworkOperation; 6] = [
        NetworkOperation::IntraSiteRoute,
        NetworkOperation::InterSiteRoute,
        NetworkOperation::IntraSiteAlert,
        NetworkOperation::InterSiteAlert,
        NetworkOperation::IntraSiteRouteQoS,
        NetworkOperation::InterSiteRouteQoS,
    ];

    pub fn new(kind: OperationKind, span: Span, qos: bool) -> Self {
        use NetworkOperation::*;
        match (kind, span, qos) {
            (OperationKind::Route, Span::Intra, false) => IntraSiteRoute,
            (OperationKind::Route, Span::Inter, false) => InterSiteRoute,
            (OperationKind::Route, Span::Intra, true) => IntraSiteRouteQoS,
            (OperationKind::Route, Span::Inter, true) => InterSiteRouteQoS,
            (OperationKind::Alert, Span::Intra, _) => IntraSiteAlert,
            (OperationKind::Alert, Span::Inter, _) => InterSiteAlert,
        }
    }

    pub fn kind(self) -> OperationKind {
        match self {
            NetworkOperation::IntraSiteAlert | NetworkOperation::InterSiteAlert => OperationKind::Alert,
            _ => OperationKind::Route,
        }
    }

    pub fn span(self) -> Span {
        match self {
            NetworkOperation::IntraSiteRoute
            | NetworkOperation::IntraSiteAlert
            | NetworkOperation::IntraSiteRouteQoS => Span::Intra,
            _ => Span::Inter,
        }
    }

    pub fn is_qos(self) -> bool {
        matches!(self, NetworkOperation::IntraSiteRouteQoS | NetworkOperation::InterSiteRouteQoS)
    }

    pub fn class(self) -> OperationClass {
        OperationClass { kind: self.kind(), span: self.span() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum Transport {
    Tcp,
    Udp,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transport::Tcp => "tcp",
            Transport::Udp => "udp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrafficType {
    RealTime,
    BestEffort,
}

/// High level description of an application's traffic.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrafficProfile {
    /// Upper-cased application name.
    pub application: String,
    pub transport: Transport,
    pub traffic_type: TrafficType,
}

/// Registered application: the match template it expands to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AppTemplate {
    pub transport: Transport,
    pub dst_port: u16,
    pub traffic_type: TrafficType,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("application `{0}` is already registered")]
    DuplicateApplication(String),
    #[error("match template {transport}/{port} is already used by `{owner}`")]
    DuplicateTemplate { transport: Transport, port: u16, owner: String },
}

/// Maps application names (case-insensitive) to match templates.
///
/// Ships with `WEB` (tcp/80), `VIDEO` (tcp/5001) and `VOICE` (udp/5060).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApplicationRegistry {
    apps: BTreeMap<String, AppTemplate>,
}

impl Default for ApplicationRegistry {
    fn default() -> Self {
        let mut registry = ApplicationRegistry::empty();
        registry.register("WEB", Transport::Tcp, 80, TrafficType::BestEffort).unwrap();
        registry.register("VIDEO", Transport::Tcp, 5001, TrafficType::RealTime).unwrap();
        registry.register("VOICE", Transport::Udp, 5060, TrafficType::RealTime).unwrap();
        registry
    }
}

impl ApplicationRegistry {
    pub fn empty() -> Self {
        ApplicationRegistry { apps: BTreeMap::new() }
    }

    pub fn register(
        &mut self,
        name: &str,
        transport: Transport,
        dst_port: u16,
        traffic_type: TrafficType,
    ) -> Result<(), RegistryError> {
        let key = name.to_ascii_uppercase();
        if self.apps.contains_key(&key) {
            return Err(RegistryError::DuplicateApplication(key));
        }
        if let Some(owner) = self.application_for(transport, dst_port) {
            return Err(RegistryError::DuplicateTemplate { transport, port: dst_port, owner: owner.to_string() });
        }
        self.apps.insert(key, AppTemplate { transport, dst_port, traffic_type });
        Ok(())
    }

    pub fn template(&self, name: &str) -> Option<&AppTemplate> {
        self.apps.get(&name.to_ascii_uppercase())
    }

    pub fn profile(&self, name: &str) -> Option<TrafficProfile> {
        let key = name.to_ascii_uppercase();
        self.apps.get(&key).map(|t| TrafficProfile {
            application: key,
            transport: t.transport,
            traffic_type: t.traffic_type,
        })
    }

    /// Reverse lookup from a concrete (transport, destination port).
    pub fn application_for(&self, transport: Transport, dst_port: u16) -> Option<&str> {
        self.apps
            .iter()
            .find(|(_, t)| t.transport == transport && t.dst_port == dst_port)
            .map(|(name, _)| name.as_str())
    }

    pub fn applications(&self) -> impl Iterator<Item = &str> {
        self.apps.keys().map(String::as_str)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrafficCondition {
    /// Per-flow rate cap in bits per second.
    RateLimitPerFlow { bps: u64 },
}

/// One administrator intent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    pub operation: NetworkOperation,
    pub profile: TrafficProfile,
    pub priority: u32,
    pub source_region: String,
    pub destination_region: String,
    pub address_space: AddressSpace,
    pub traffic_conditions: Vec<TrafficCondition>,
}

impl Policy {
    /// Checks every structural invariant. Host names are not resolved here.
    pub fn validate(&self) -> Result<(), SemanticError> {
        if self.priority == 0 {
            return Err(SemanticError::ZeroPriority);
        }
        match self.operation.span() {
            Span::Intra if self.source_region != self.destination_region => {
                return Err(SemanticError::RegionMismatch {
                    src_region: self.source_region.clone(),
                    dst_region: self.destination_region.clone(),
                })
            }
            Span::Inter if self.source_region == self.destination_region => {
                return Err(SemanticError::RegionMismatch {
                    src_region: self.source_region.clone(),
                    dst_region: self.destination_region.clone(),
                })
            }
            _ => {}
        }
        if let HostSpace::Pairs(pairs) = &self.address_space.hosts {
            if pairs.is_empty() {
                return Err(SemanticError::EmptyAddressSpace);
            }
        }
        let mut limits = 0;
        for condition in &self.traffic_conditions {
            let TrafficCondition::RateLimitPerFlow { bps } = *condition;
            limits += 1;
            if bps == 0 || bps % 1_000_000 != 0 {
                return Err(SemanticError::BadRate(bps));
            }
        }
        if limits > 1 {
            return Err(SemanticError::DuplicateRateLimit);
        }
        match (self.operation.is_qos(), limits) {
            (true, 0) => Err(SemanticError::MissingRateLimit),
            (false, 1) if self.operation.kind() == OperationKind::Alert => Err(SemanticError::AlertWithRateLimit),
            (false, 1) => Err(SemanticError::MissingRateLimit),
            _ => Ok(()),
        }
    }

    pub fn rate_limit(&self) -> Option<u64> {
        self.traffic_conditions.iter().map(|TrafficCondition::RateLimitPerFlow { bps }| *bps).next()
    }

    /// Region names this policy spans (one for intra-site policies).
    pub fn regions(&self) -> Vec<&str> {
        if self.source_region == self.destination_region {
            alloc::vec![self.source_region.as_str()]
        } else {
            alloc::vec![self.source_region.as_str(), self.destination_region.as_str()]
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_policy(self))
    }
}
