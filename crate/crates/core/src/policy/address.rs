use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Unordered pair of host names, stored with the smaller name first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostPair {
    a: String,
    b: String,
}

impl HostPair {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        let (x, y) = (x.into(), y.into());
        if x <= y {
            HostPair { a: x, b: y }
        } else {
            HostPair { a: y, b: x }
        }
    }

    pub fn first(&self) -> &str {
        &self.a
    }

    pub fn second(&self) -> &str {
        &self.b
    }

    pub fn contains(&self, host: &str) -> bool {
        self.a == host || self.b == host
    }
}

impl fmt::Display for HostPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// The host part of an address space condition.
///
/// `AllHosts` covers every pair; a finite set covers exactly its members.
/// Finite sets are never empty in a valid policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HostSpace {
    AllHosts,
    Pairs(BTreeSet<HostPair>),
}

/// Result of removing one host space from another.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Difference {
    Empty,
    Space(HostSpace),
    /// The wildcard minus a finite set has no finite representation.
    Unrepresentable,
}

impl HostSpace {
    pub fn pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        HostSpace::Pairs(pairs.into_iter().map(|(a, b)| HostPair::new(a, b)).collect())
    }

    pub fn is_all(&self) -> bool {
        matches!(self, HostSpace::AllHosts)
    }

    pub fn covers(&self, pair: &HostPair) -> bool {
        match self {
            HostSpace::AllHosts => true,
            HostSpace::Pairs(set) => set.contains(pair),
        }
    }

    /// `self ⊆ other` under the coverage relation.
    pub fn is_subset(&self, other: &HostSpace) -> bool {
        match (self, other) {
            (_, HostSpace::AllHosts) => true,
            (HostSpace::AllHosts, HostSpace::Pairs(_)) => false,
            (HostSpace::Pairs(a), HostSpace::Pairs(b)) => a.is_subset(b),
        }
    }

    pub fn is_superset(&self, other: &HostSpace) -> bool {
        other.is_subset(self)
    }

    pub fn intersects(&self, other: &HostSpace) -> bool {
        match (self, other) {
            (HostSpace::AllHosts, HostSpace::AllHosts) => true,
            (HostSpace::AllHosts, HostSpace::Pairs(s)) | (HostSpace::Pairs(s), HostSpace::AllHosts) => !s.is_empty(),
            (HostSpace::Pairs(a), HostSpace::Pairs(b)) => !a.is_disjoint(b),
        }
    }

    /// Pairs covered by both, `None` when nothing is shared.
    pub fn intersection(&self, other: &HostSpace) -> Option<HostSpace> {
        let result = match (self, other) {
            (HostSpace::AllHosts, HostSpace::AllHosts) => HostSpace::AllHosts,
            (HostSpace::AllHosts, HostSpace::Pairs(s)) | (HostSpace::Pairs(s), HostSpace::AllHosts) => {
                HostSpace::Pairs(s.clone())
            }
            (HostSpace::Pairs(a), HostSpace::Pairs(b)) => HostSpace::Pairs(a.intersection(b).cloned().collect()),
        };
        match &result {
            HostSpace::Pairs(s) if s.is_empty() => None,
            _ => Some(result),
        }
    }

    pub fn union(&self, other: &HostSpace) -> HostSpace {
        match (self, other) {
            (HostSpace::Pairs(a), HostSpace::Pairs(b)) => HostSpace::Pairs(a.union(b).cloned().collect()),
            _ => HostSpace::AllHosts,
        }
    }

    pub fn difference(&self, other: &HostSpace) -> Difference {
        match (self, other) {
            (_, HostSpace::AllHosts) => Difference::Empty,
            (HostSpace::AllHosts, HostSpace::Pairs(_)) => Difference::Unrepresentable,
            (HostSpace::Pairs(a), HostSpace::Pairs(b)) => {
                let rest: BTreeSet<_> = a.difference(b).cloned().collect();
                if rest.is_empty() {
                    Difference::Empty
                } else {
                    Difference::Space(HostSpace::Pairs(rest))
                }
            }
        }
    }

    /// Every host name mentioned by a finite set.
    pub fn hosts(&self) -> BTreeSet<&str> {
        match self {
            HostSpace::AllHosts => BTreeSet::new(),
            HostSpace::Pairs(set) => set.iter().flat_map(|p| [p.first(), p.second()]).collect(),
        }
    }
}

/// A device the path must traverse, optionally leaving through a given port.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Waypoint {
    pub device: String,
    pub port: Option<u32>,
}

impl Waypoint {
    pub fn new(device: impl Into<String>, port: Option<u32>) -> Self {
        Waypoint { device: device.into(), port }
    }
}

impl fmt::Display for Waypoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.port {
            Some(port) => write!(f, "{}:{}", self.device, port),
            None => f.write_str(&self.device),
        }
    }
}

/// Hosts and devices a policy applies to.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AddressSpace {
    pub hosts: HostSpace,
    pub waypoints: Vec<Waypoint>,
}

impl AddressSpace {
    pub fn all_hosts() -> Self {
        AddressSpace { hosts: HostSpace::AllHosts, waypoints: Vec::new() }
    }

    pub fn with_hosts(hosts: HostSpace) -> Self {
        AddressSpace { hosts, waypoints: Vec::new() }
    }

    pub fn is_subset(&self, other: &AddressSpace) -> bool {
        self.hosts.is_subset(&other.hosts)
    }

    pub fn is_superset(&self, other: &AddressSpace) -> bool {
        self.hosts.is_superset(&other.hosts)
    }

    pub fn intersects(&self, other: &AddressSpace) -> bool {
        self.hosts.intersects(&other.hosts)
    }
}
