//! Topologies and generators shared by unit tests.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use crate::network::{ConfigSpec, HostSpec, LinkSpec, NetworkConfig, RegionSpec, SwitchSpec};
use crate::policy::{
    AddressSpace, ApplicationRegistry, HostSpace, NetworkOperation, OperationKind, Policy, Span, TrafficCondition,
    Waypoint,
};

pub fn link(a: &str, b: &str) -> LinkSpec {
    LinkSpec { a: a.into(), b: b.into(), capacity_mbps: None }
}

pub fn host(name: &str, attach: &str) -> HostSpec {
    HostSpec { name: name.into(), attach: attach.into() }
}

fn region(name: &str, switches: &[&str]) -> RegionSpec {
    RegionSpec { name: name.into(), switches: switches.iter().map(|s| s.to_string()).collect() }
}

fn sw(ids: &[&str]) -> Vec<SwitchSpec> {
    ids.iter().map(|id| SwitchSpec { id: id.to_string() }).collect()
}

/// S1..Sn in a chain, Hi on Si:3, region D.
pub fn linear(n: usize) -> NetworkConfig {
    let ids: Vec<String> = (1..=n).map(|i| format!("S{i}")).collect();
    let spec = ConfigSpec {
        switches: ids.iter().map(|id| SwitchSpec { id: id.clone() }).collect(),
        links: (1..n).map(|i| link(&format!("S{i}:2"), &format!("S{}:1", i + 1))).collect(),
        hosts: (1..=n).map(|i| host(&format!("H{i}"), &format!("S{i}:3"))).collect(),
        regions: vec![RegionSpec { name: "D".into(), switches: ids }],
    };
    NetworkConfig::from_spec(&spec).unwrap()
}

/// Spines S1, S2; leaves S3..S5 with two hosts each; region A.
pub fn leaf_spine() -> NetworkConfig {
    let mut links = Vec::new();
    for (li, leaf) in ["S3", "S4", "S5"].iter().enumerate() {
        for (si, spine) in ["S1", "S2"].iter().enumerate() {
            links.push(link(&format!("{leaf}:{}", si + 1), &format!("{spine}:{}", li + 1)));
        }
    }
    let spec = ConfigSpec {
        switches: sw(&["S1", "S2", "S3", "S4", "S5"]),
        links,
        hosts: vec![
            host("H1", "S3:3"),
            host("H2", "S3:4"),
            host("H3", "S4:3"),
            host("H4", "S4:4"),
            host("H5", "S5:3"),
            host("H6", "S5:4"),
        ],
        regions: vec![region("A", &["S1", "S2", "S3", "S4", "S5"])],
    };
    NetworkConfig::from_spec(&spec).unwrap()
}

/// Ten-switch site C with an upper (S2, S3, S7) and lower (S4, S6, S8) route
/// between S1 and S10.
pub fn site_c() -> NetworkConfig {
    let spec = ConfigSpec {
        switches: sw(&["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10"]),
        links: vec![
            link("S1:2", "S2:1"),
            link("S1:3", "S4:1"),
            link("S2:2", "S3:1"),
            link("S2:3", "S5:1"),
            link("S3:2", "S7:1"),
            link("S4:2", "S6:1"),
            link("S5:2", "S6:2"),
            link("S6:3", "S9:1"),
            link("S6:4", "S8:1"),
            link("S7:2", "S10:2"),
            link("S8:2", "S10:3"),
            link("S9:2", "S10:4"),
        ],
        hosts: vec![host("H1", "S1:1"), host("H2", "S10:1")],
        regions: vec![region("C", &["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10"])],
    };
    NetworkConfig::from_spec(&spec).unwrap()
}

/// IT and Sales sites joined by two disjoint inter-site links.
pub fn it_sales() -> NetworkConfig {
    let spec = ConfigSpec {
        switches: sw(&["IT-S1", "IT-S2", "Sales-S1", "Sales-S2", "Sales-S3"]),
        links: vec![
            link("IT-S1:1", "Sales-S1:1"),
            link("IT-S1:2", "IT-S2:2"),
            link("Sales-S1:2", "Sales-S2:1"),
            link("Sales-S1:3", "Sales-S3:1"),
            link("Sales-S2:2", "Sales-S3:2"),
            link("Sales-S3:5", "IT-S2:1"),
        ],
        hosts: vec![
            host("IT-H1", "IT-S1:3"),
            host("IT-H2", "IT-S1:4"),
            host("IT-H3", "IT-S1:5"),
            host("IT-H4", "IT-S1:6"),
            host("IT-H5", "IT-S2:3"),
            host("IT-H6", "IT-S2:4"),
            host("Sales-H1", "Sales-S2:3"),
            host("Sales-H2", "Sales-S2:4"),
            host("Sales-H3", "Sales-S2:5"),
            host("Sales-H4", "Sales-S2:6"),
            host("Sales-H5", "Sales-S3:3"),
            host("Sales-H6", "Sales-S3:4"),
        ],
        regions: vec![region("IT", &["IT-S1", "IT-S2"]), region("Sales", &["Sales-S1", "Sales-S2", "Sales-S3"])],
    };
    NetworkConfig::from_spec(&spec).unwrap()
}

pub fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_.-]{0,6}".prop_filter("not a keyword", |s| {
        !["between", "via", "ratelimit", "priority", "to", "in", "from", "all"]
            .iter()
            .any(|k| s.eq_ignore_ascii_case(k))
    })
}

prop_compose! {
    pub fn arb_policy()(
        alert in any::<bool>(),
        inter in any::<bool>(),
        app in prop::sample::select(vec!["WEB", "VIDEO", "VOICE"]),
        src in name(),
        dst in name(),
        priority in 1u32..1000,
        pairs in prop::option::of(prop::collection::vec((name(), name()), 1..4)),
        waypoints in prop::collection::vec((name(), prop::option::of(1u32..48)), 0..3),
        rate in prop::option::of(1u64..10_000),
    ) -> Policy {
        let inter = inter && src != dst;
        let rate = if alert { None } else { rate };
        let kind = if alert { OperationKind::Alert } else { OperationKind::Route };
        let span = if inter { Span::Inter } else { Span::Intra };
        Policy {
            operation: NetworkOperation::new(kind, span, rate.is_some()),
            profile: ApplicationRegistry::default().profile(app).unwrap(),
            priority,
            source_region: src.clone(),
            destination_region: if inter { dst } else { src },
            address_space: AddressSpace {
                hosts: match pairs {
                    None => HostSpace::AllHosts,
                    Some(p) => HostSpace::pairs(p),
                },
                waypoints: waypoints.into_iter().map(|(d, p)| Waypoint::new(d, p)).collect(),
            },
            traffic_conditions: rate
                .map(|mbps| vec![TrafficCondition::RateLimitPerFlow { bps: mbps * 1_000_000 }])
                .unwrap_or_default(),
        }
    }
}
