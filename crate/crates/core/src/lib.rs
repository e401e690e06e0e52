//! Intent-based SDN policy engine.
//!
//! Administrators describe what the network should do with short application
//! policies (`route WEB in A between (H1,H3)`); this crate turns those into
//! something a data plane can execute and checks them against each other:
//!
//! - [`policy`]: the policy data model, the application registry and the
//!   textual grammar (parser and canonical renderer).
//! - [`store`]: the set of active policies with runtime add/remove/update.
//! - [`conflict`]: pairwise conflict classification (redundancy, shadowing,
//!   generalization, correlation, overlap) and resolution recommendations.
//! - [`network`]: switches, links, hosts and regions, validated from a
//!   declarative [`network::ConfigSpec`].
//! - [`compiler`]: match-field construction, waypoint-constrained path
//!   selection and emission of prioritized flow rules.
//! - [`sim`]: a deterministic flow-level simulator with per-switch flow
//!   tables, packet-in handling for the pre-installing controller and a
//!   hop-by-hop reactive baseline, and a max-min fair throughput solver.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, JSON and the
//! command line live in the companion `osdf` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod compiler;
pub mod conflict;
pub mod network;
pub mod policy;
pub mod sim;
pub mod store;
#[cfg(test)]
mod testutil;

pub use compiler::{Compiler, FlowEndpoints, FlowRule, MatchFields, MeterSpec, Path, RuleAction};
pub use conflict::{classify_pair, detect_all, recommend, ConflictClass, ConflictReport, ResolutionAction};
pub use network::{ConfigSpec, NetworkConfig, Region};
pub use policy::{
    parse_policy, parse_policy_with, render_policy, AddressSpace, ApplicationRegistry, HostPair, HostSpace,
    NetworkOperation, Policy, PolicyId, TrafficProfile,
};
pub use sim::{FlowRequest, Mode, SimEvent, Simulator, ThroughputReport};
pub use store::PolicyStore;
