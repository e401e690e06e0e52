use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::network::{PortRef, PortUse, Topology};
use crate::policy::Waypoint;

/// One switch traversal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hop {
    pub switch: String,
    pub ingress: u32,
    pub egress: u32,
}

/// Host-to-host route through the switch graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub src: String,
    pub dst: String,
    pub hops: Vec<Hop>,
}

impl Path {
    pub fn switches(&self) -> impl Iterator<Item = &str> {
        self.hops.iter().map(|h| h.switch.as_str())
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// Host and switch names from end to end, e.g. `H1,S1,S2,H2`.
    pub fn nodes(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.hops.len() + 2);
        out.push(self.src.clone());
        out.extend(self.hops.iter().map(|h| h.switch.clone()));
        out.push(self.dst.clone());
        out
    }

    /// The same hops walked backwards.
    pub fn reversed(&self) -> Path {
        Path {
            src: self.dst.clone(),
            dst: self.src.clone(),
            hops: self
                .hops
                .iter()
                .rev()
                .map(|h| Hop { switch: h.switch.clone(), ingress: h.egress, egress: h.ingress })
                .collect(),
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes().join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("unknown host `{0}`")]
    UnknownHost(String),
    #[error("unknown waypoint device `{0}`")]
    UnknownDevice(String),
    #[error("waypoint {0} does not lead anywhere usable")]
    BadWaypointPort(String),
    #[error("no path from {from} to {to}")]
    NoPath { from: String, to: String },
}

/// Minimal-hop switch sequence from `from` to `to`, lexicographically
/// smallest among equals. Each element is `(switch, ingress, egress)` with
/// `ingress` of the first and `egress` of the last left as 0.
fn segment(topology: &Topology, from: &str, to: &str) -> Option<Vec<(String, u32, u32)>> {
    if from == to {
        return Some(alloc::vec![(from.to_string(), 0, 0)]);
    }
    // Hop distances to `to`.
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    dist.insert(to, 0);
    queue.push_back(to);
    while let Some(s) = queue.pop_front() {
        let d = dist[s];
        for (_, peer) in topology.neighbours(s) {
            if !dist.contains_key(peer.switch.as_str()) {
                dist.insert(peer.switch.as_str(), d + 1);
                queue.push_back(peer.switch.as_str());
            }
        }
    }
    let mut remaining = *dist.get(from)?;
    // Walk greedily: smallest next switch id on a shortest path, lowest local
    // port among parallel links.
    let mut out: Vec<(String, u32, u32)> = alloc::vec![(from.to_string(), 0, 0)];
    let mut here = from;
    while remaining > 0 {
        let (port, peer) = topology
            .neighbours(here)
            .filter(|(_, peer)| dist.get(peer.switch.as_str()) == Some(&(remaining - 1)))
            .min_by(|(pa, a), (pb, b)| a.switch.cmp(&b.switch).then(pa.cmp(pb)))?;
        out.last_mut().unwrap().2 = port;
        out.push((peer.switch.clone(), peer.port, 0));
        here = peer.switch.as_str();
        remaining -= 1;
    }
    Some(out)
}

/// Shortest path from `src` to `dst` that visits each waypoint in order,
/// leaving a waypoint through its port when one is given. Switches may repeat
/// across waypoint segments.
pub fn select_path(topology: &Topology, src: &str, dst: &str, waypoints: &[Waypoint]) -> Result<Path, PathError> {
    let src_host = topology.host(src).ok_or_else(|| PathError::UnknownHost(src.into()))?;
    let dst_host = topology.host(dst).ok_or_else(|| PathError::UnknownHost(dst.into()))?;
    let no_path = || PathError::NoPath { from: src.into(), to: dst.into() };

    let mut hops: Vec<Hop> = Vec::new();
    let mut cursor = src_host.attach.clone();
    // Set when the last waypoint's forced exit port is the destination host.
    let mut delivered = false;

    for (i, wp) in waypoints.iter().enumerate() {
        if delivered {
            return Err(PathError::BadWaypointPort(waypoints[i - 1].to_string()));
        }
        if !topology.has_switch(&wp.device) {
            return Err(PathError::UnknownDevice(wp.device.clone()));
        }
        let seg = segment(topology, &cursor.switch, &wp.device).ok_or_else(no_path)?;
        append(&mut hops, cursor.port, seg);
        let Some(port) = wp.port else {
            // Only a visit is required: the next segment starts at this switch.
            let last = hops.pop().unwrap();
            cursor = PortRef::new(last.switch, last.ingress);
            continue;
        };
        let exit = PortRef::new(wp.device.clone(), port);
        match topology.port(&exit) {
            Some(PortUse::Link(index)) => {
                hops.last_mut().unwrap().egress = port;
                let peer = topology.links()[*index].peer_of(&exit).unwrap().clone();
                cursor = peer;
            }
            Some(PortUse::Host(h)) if h == dst => {
                hops.last_mut().unwrap().egress = port;
                delivered = true;
            }
            _ => return Err(PathError::BadWaypointPort(wp.to_string())),
        }
    }

    if !delivered {
        let seg = segment(topology, &cursor.switch, &dst_host.attach.switch).ok_or_else(no_path)?;
        append(&mut hops, cursor.port, seg);
        hops.last_mut().unwrap().egress = dst_host.attach.port;
    }
    Ok(Path { src: src.into(), dst: dst.into(), hops })
}

fn append(hops: &mut Vec<Hop>, ingress: u32, seg: Vec<(String, u32, u32)>) {
    for (k, (switch, seg_in, egress)) in seg.into_iter().enumerate() {
        let ingress = if k == 0 { ingress } else { seg_in };
        hops.push(Hop { switch, ingress, egress });
    }
}
