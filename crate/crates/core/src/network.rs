//! Switches, links, hosts and regions.
//!
//! A [`NetworkConfig`] is built once from a declarative [`ConfigSpec`] and is
//! immutable afterwards. Construction validates that every link endpoint and
//! host attachment names a declared switch, that no port is used twice, and
//! that the regions partition the switches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::conflict::HostResolver;
use crate::policy::DEFAULT_PRIORITY;

/// 1 Gbps.
pub const DEFAULT_LINK_CAPACITY_BPS: u64 = 1_000_000_000;
/// Flow table entries per switch.
pub const DEFAULT_TABLE_CAPACITY: usize = 2000;

/// A `switch:port` reference such as `S1:2`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub switch: String,
    pub port: u32,
}

impl PortRef {
    pub fn new(switch: impl Into<String>, port: u32) -> Self {
        PortRef { switch: switch.into(), port }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.switch, self.port)
    }
}

impl FromStr for PortRef {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (switch, port) = s.rsplit_once(':').ok_or(())?;
        let port: u32 = port.parse().map_err(|_| ())?;
        if switch.is_empty() || port == 0 {
            return Err(());
        }
        Ok(PortRef::new(switch, port))
    }
}

// Declarative input, deserializable from the JSON config file.

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct ConfigSpec {
    pub switches: Vec<SwitchSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub links: Vec<LinkSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub hosts: Vec<HostSpec>,
    pub regions: Vec<RegionSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct SwitchSpec {
    pub id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub capacity_mbps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct HostSpec {
    pub name: String,
    pub attach: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct RegionSpec {
    pub name: String,
    pub switches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("{location}: duplicate switch `{id}`")]
    DuplicateSwitch { location: String, id: String },
    #[error("{location}: malformed port reference `{text}` (expected SWITCH:PORT with PORT >= 1)")]
    BadPortRef { location: String, text: String },
    #[error("{location}: unknown switch `{switch}`")]
    UnknownSwitch { location: String, switch: String },
    #[error("{location}: port {port} is already used by {other}")]
    PortInUse { location: String, port: PortRef, other: String },
    #[error("{location}: link capacity must be positive")]
    ZeroCapacity { location: String },
    #[error("{location}: duplicate host `{name}`")]
    DuplicateHost { location: String, name: String },
    #[error("{location}: duplicate region `{name}`")]
    DuplicateRegion { location: String, name: String },
    #[error("{location}: switch `{switch}` already belongs to region `{region}`")]
    DuplicateMembership { location: String, switch: String, region: String },
    #[error("switch `{0}` belongs to no region")]
    Unassigned(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown host or switch `{0}`")]
    NotFound(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: PortRef,
    pub b: PortRef,
    pub capacity_bps: u64,
}

impl Link {
    /// The far end when leaving through `from`.
    pub fn peer_of(&self, from: &PortRef) -> Option<&PortRef> {
        if &self.a == from {
            Some(&self.b)
        } else if &self.b == from {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Host {
    pub name: String,
    pub attach: PortRef,
    pub address: String,
}

/// What sits behind a switch port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PortUse {
    Link(usize),
    Host(String),
}

/// Undirected multigraph of switches with attached hosts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    switches: BTreeSet<String>,
    links: Vec<Link>,
    hosts: BTreeMap<String, Host>,
    ports: BTreeMap<PortRef, PortUse>,
}

impl Topology {
    pub fn switches(&self) -> impl Iterator<Item = &str> {
        self.switches.iter().map(String::as_str)
    }

    pub fn has_switch(&self, id: &str) -> bool {
        self.switches.contains(id)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.hosts.values()
    }

    pub fn host(&self, name: &str) -> Option<&Host> {
        self.hosts.get(name)
    }

    pub fn port(&self, port: &PortRef) -> Option<&PortUse> {
        self.ports.get(port)
    }

    /// Ports in use on `switch`, ascending.
    pub fn ports_of<'a>(&'a self, switch: &'a str) -> impl Iterator<Item = (u32, &'a PortUse)> + 'a {
        self.ports.range(PortRef::new(switch, 0)..=PortRef::new(switch, u32::MAX)).map(|(p, u)| (p.port, u))
    }

    /// `(local port, neighbour port)` for every link leaving `switch`.
    pub fn neighbours<'a>(&'a self, switch: &'a str) -> impl Iterator<Item = (u32, &'a PortRef)> + 'a {
        self.ports_of(switch).filter_map(move |(port, use_)| match use_ {
            PortUse::Link(i) => self.links[*i].peer_of(&PortRef::new(switch, port)).map(|peer| (port, peer)),
            PortUse::Host(_) => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub switches: BTreeSet<String>,
    /// Hosts attached to member switches.
    pub hosts: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Defaults {
    pub priority: u32,
    pub link_capacity_bps: u64,
    pub table_capacity: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            priority: DEFAULT_PRIORITY,
            link_capacity_bps: DEFAULT_LINK_CAPACITY_BPS,
            table_capacity: DEFAULT_TABLE_CAPACITY,
        }
    }
}

/// Whether a host pair stays inside one region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowSpan {
    IntraRegion(String),
    InterRegion(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub topology: Topology,
    pub regions: Vec<Region>,
    pub defaults: Defaults,
    switch_region: BTreeMap<String, usize>,
}

fn port_ref(text: &str, location: &str) -> Result<PortRef, ValidationError> {
    text.parse().map_err(|_| ValidationError::BadPortRef { location: location.to_string(), text: text.to_string() })
}

fn host_address(index: usize) -> String {
    let i = index + 1;
    format!("10.{}.{}.{}", (i >> 16) & 0xff, (i >> 8) & 0xff, i & 0xff)
}

impl NetworkConfig {
    pub fn from_spec(spec: &ConfigSpec) -> Result<Self, ValidationError> {
        Self::with_defaults(spec, Defaults::default())
    }

    pub fn with_defaults(spec: &ConfigSpec, defaults: Defaults) -> Result<Self, ValidationError> {
        let mut switches = BTreeSet::new();
        for (i, s) in spec.switches.iter().enumerate() {
            if !switches.insert(s.id.clone()) {
                return Err(ValidationError::DuplicateSwitch { location: format!("switches[{i}]"), id: s.id.clone() });
            }
        }

        let mut ports: BTreeMap<PortRef, PortUse> = BTreeMap::new();
        let mut claim = |port: PortRef, use_: PortUse, location: String| -> Result<(), ValidationError> {
            if !switches.contains(&port.switch) {
                return Err(ValidationError::UnknownSwitch { location, switch: port.switch });
            }
            if let Some(existing) = ports.get(&port) {
                let other = match existing {
                    PortUse::Link(j) => format!("links[{j}]"),
                    PortUse::Host(h) => format!("host `{h}`"),
                };
                return Err(ValidationError::PortInUse { location, port, other });
            }
            ports.insert(port, use_);
            Ok(())
        };

        let mut links = Vec::with_capacity(spec.links.len());
        for (i, l) in spec.links.iter().enumerate() {
            let a = port_ref(&l.a, &format!("links[{i}].a"))?;
            let b = port_ref(&l.b, &format!("links[{i}].b"))?;
            claim(a.clone(), PortUse::Link(i), format!("links[{i}].a"))?;
            claim(b.clone(), PortUse::Link(i), format!("links[{i}].b"))?;
            let capacity_bps = match l.capacity_mbps {
                Some(0) => return Err(ValidationError::ZeroCapacity { location: format!("links[{i}].capacity_mbps") }),
                Some(mbps) => mbps.saturating_mul(1_000_000),
                None => defaults.link_capacity_bps,
            };
            links.push(Link { a, b, capacity_bps });
        }

        let mut hosts = BTreeMap::new();
        for (i, h) in spec.hosts.iter().enumerate() {
            let location = format!("hosts[{i}]");
            if hosts.contains_key(&h.name) {
                return Err(ValidationError::DuplicateHost { location, name: h.name.clone() });
            }
            let attach = port_ref(&h.attach, &format!("{location}.attach"))?;
            claim(attach.clone(), PortUse::Host(h.name.clone()), format!("{location}.attach"))?;
            hosts.insert(h.name.clone(), Host { name: h.name.clone(), attach, address: host_address(i) });
        }

        let mut regions: Vec<Region> = Vec::with_capacity(spec.regions.len());
        let mut switch_region: BTreeMap<String, usize> = BTreeMap::new();
        for (i, r) in spec.regions.iter().enumerate() {
            if regions.iter().any(|x| x.name == r.name) {
                return Err(ValidationError::DuplicateRegion {
                    location: format!("regions[{i}]"),
                    name: r.name.clone(),
                });
            }
            for (k, s) in r.switches.iter().enumerate() {
                let location = format!("regions[{i}].switches[{k}]");
                if !switches.contains(s) {
                    return Err(ValidationError::UnknownSwitch { location, switch: s.clone() });
                }
                if let Some(&owner) = switch_region.get(s) {
                    let region = if owner == i { r.name.clone() } else { regions[owner].name.clone() };
                    return Err(ValidationError::DuplicateMembership { location, switch: s.clone(), region });
                }
                switch_region.insert(s.clone(), i);
            }
            let members: BTreeSet<String> = r.switches.iter().cloned().collect();
            let region_hosts =
                hosts.values().filter(|h: &&Host| members.contains(&h.attach.switch)).map(|h| h.name.clone()).collect();
            regions.push(Region { name: r.name.clone(), switches: members, hosts: region_hosts });
        }
        if let Some(orphan) = switches.iter().find(|s| !switch_region.contains_key(*s)) {
            return Err(ValidationError::Unassigned(orphan.clone()));
        }

        Ok(NetworkConfig { topology: Topology { switches, links, hosts, ports }, regions, defaults, switch_region })
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    /// The region containing a host or switch.
    pub fn region_of(&self, name: &str) -> Result<&Region, NetworkError> {
        let switch = match self.topology.host(name) {
            Some(host) => host.attach.switch.as_str(),
            None => name,
        };
        self.switch_region
            .get(switch)
            .map(|&i| &self.regions[i])
            .ok_or_else(|| NetworkError::NotFound(name.to_string()))
    }

    pub fn host(&self, name: &str) -> Result<&Host, NetworkError> {
        self.topology.host(name).ok_or_else(|| NetworkError::NotFound(name.to_string()))
    }

    pub fn classify_flow_span(&self, src: &str, dst: &str) -> Result<FlowSpan, NetworkError> {
        let a = self.region_of(&self.host(src)?.attach.switch)?;
        let b = self.region_of(&self.host(dst)?.attach.switch)?;
        Ok(if a.name == b.name {
            FlowSpan::IntraRegion(a.name.clone())
        } else {
            FlowSpan::InterRegion(a.name.clone(), b.name.clone())
        })
    }
}

impl HostResolver for NetworkConfig {
    fn resolves(&self, host: &str, regions: &[&str]) -> bool {
        match self.topology.host(host) {
            Some(_) => self.region_of(host).map(|r| regions.contains(&r.name.as_str())).unwrap_or(false),
            None => false,
        }
    }
}
