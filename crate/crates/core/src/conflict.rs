//! Pairwise policy conflict detection and resolution advice.
//!
//! Two policies can only conflict when they name the same traffic profile and
//! the same source and destination regions. Within that, the ordered pair
//! `(Pi, Pj)` is labelled by the first row that holds:
//!
//! | class          | operations | address spaces                    | priority  |
//! |----------------|------------|-----------------------------------|-----------|
//! | Redundancy     | equal      | `SCi ⊆ SCj`                       | `pi <= pj`|
//! | Shadowing      | different  | `SCi ⊆ SCj`                       | `pi < pj` |
//! | Generalization | different  | `SCi ⊇ SCj`                       | `pi < pj` |
//! | Correlation    | different  | intersect, neither contains other | `pi <= pj`|
//! | Overlap        | equal      | intersect, neither contains other | any       |
//!
//! Address spaces are compared on their host pairs; waypoints steer paths but
//! do not change which traffic a policy claims.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::policy::{render_policy, AddressSpace, Difference, HostSpace, Policy, PolicyId};
use crate::store::{PolicyStore, StoreError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictClass {
    NoConflict,
    Redundancy,
    Shadowing,
    Generalization,
    Correlation,
    Overlap,
}

impl fmt::Display for ConflictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictClass::NoConflict => "NoConflict",
            ConflictClass::Redundancy => "Redundancy",
            ConflictClass::Shadowing => "Shadowing",
            ConflictClass::Generalization => "Generalization",
            ConflictClass::Correlation => "Correlation",
            ConflictClass::Overlap => "Overlap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConflictError {
    #[error("policy {policy}: host `{host}` is not in the policy's regions")]
    UnresolvableHost { policy: PolicyId, host: String },
    #[error("no resolution exists for a pair without conflict")]
    InvalidClass,
}

/// Decides whether a host name belongs to one of a policy's regions.
pub trait HostResolver {
    fn resolves(&self, host: &str, regions: &[&str]) -> bool;
}

/// Accepts every host name; used when no network configuration is at hand.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unchecked;

impl HostResolver for Unchecked {
    fn resolves(&self, _host: &str, _regions: &[&str]) -> bool {
        true
    }
}

/// What to do about a conflict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResolutionAction {
    /// Drop the policy. `lossy` marks a fallback where the intended narrowing
    /// could not be represented and removal discards more than the overlap.
    RemovePolicy { id: PolicyId, lossy: bool },
    /// Replace the policy's address space.
    UpdateAddressSpace { id: PolicyId, address_space: AddressSpace },
    /// Remove both policies and insert their merge.
    ReplaceBoth { remove: (PolicyId, PolicyId), insert: Policy },
}

impl ResolutionAction {
    pub fn is_lossy(&self) -> bool {
        matches!(self, ResolutionAction::RemovePolicy { lossy: true, .. })
    }

    /// Applies the action to `store`. A merged policy gets a fresh id, which
    /// is returned.
    pub fn apply(&self, store: &mut PolicyStore) -> Result<Option<PolicyId>, StoreError> {
        match self {
            ResolutionAction::RemovePolicy { id, .. } => {
                store.remove(*id)?;
                Ok(None)
            }
            ResolutionAction::UpdateAddressSpace { id, address_space } => {
                let mut updated = store.get(*id).cloned().ok_or(StoreError::NotFound(*id))?;
                updated.address_space = address_space.clone();
                store.update(*id, updated)?;
                Ok(None)
            }
            ResolutionAction::ReplaceBoth { remove: (a, b), insert } => {
                if !store.contains(*b) {
                    return Err(StoreError::NotFound(*b));
                }
                insert.validate()?;
                store.remove(*a)?;
                store.remove(*b)?;
                store.add(insert.clone()).map(Some)
            }
        }
    }
}

fn render_hosts(hosts: &HostSpace) -> String {
    match hosts {
        HostSpace::AllHosts => "all hosts".into(),
        HostSpace::Pairs(pairs) => {
            let mut out = String::new();
            for (i, p) in pairs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&alloc::format!("{p}"));
            }
            out
        }
    }
}

impl fmt::Display for ResolutionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolutionAction::RemovePolicy { id, lossy: false } => write!(f, "remove {id}"),
            ResolutionAction::RemovePolicy { id, lossy: true } => {
                write!(f, "remove {id} (lossy: all-hosts address space cannot be narrowed)")
            }
            ResolutionAction::UpdateAddressSpace { id, address_space } => {
                write!(f, "restrict {id} to between {}", render_hosts(&address_space.hosts))
            }
            ResolutionAction::ReplaceBoth { remove: (a, b), insert } => {
                write!(f, "replace {a} and {b} with `{}`", render_policy(insert))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictReport {
    pub first: PolicyId,
    pub second: PolicyId,
    pub class: ConflictClass,
    pub resolution: ResolutionAction,
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} vs {}: {}", self.class, self.first, self.second, self.resolution)
    }
}

/// Labels the ordered pair `(pi, pj)`.
pub fn classify_pair(pi: &Policy, pj: &Policy) -> ConflictClass {
    if pi.profile != pj.profile
        || pi.source_region != pj.source_region
        || pi.destination_region != pj.destination_region
    {
        return ConflictClass::NoConflict;
    }
    let (sci, scj) = (&pi.address_space.hosts, &pj.address_space.hosts);
    let same_op = pi.operation == pj.operation;
    let subset = sci.is_subset(scj);
    let superset = sci.is_superset(scj);
    let partial = !subset && !superset && sci.intersects(scj);

    if same_op && subset && pi.priority <= pj.priority {
        ConflictClass::Redundancy
    } else if !same_op && subset && pi.priority < pj.priority {
        ConflictClass::Shadowing
    } else if !same_op && superset && pi.priority < pj.priority {
        ConflictClass::Generalization
    } else if !same_op && partial && pi.priority <= pj.priority {
        ConflictClass::Correlation
    } else if same_op && partial {
        ConflictClass::Overlap
    } else {
        ConflictClass::NoConflict
    }
}

/// Fails when a host named by `policy` is outside its regions.
pub fn check_hosts(id: PolicyId, policy: &Policy, resolver: &impl HostResolver) -> Result<(), ConflictError> {
    let regions = policy.regions();
    for host in policy.address_space.hosts.hosts() {
        if !resolver.resolves(host, &regions) {
            return Err(ConflictError::UnresolvableHost { policy: id, host: host.into() });
        }
    }
    Ok(())
}

/// Advice for a classified pair.
pub fn recommend(
    (id_i, pi): (PolicyId, &Policy),
    (id_j, pj): (PolicyId, &Policy),
    class: ConflictClass,
) -> Result<ResolutionAction, ConflictError> {
    let narrowed = |id, p: &Policy, minus: &HostSpace| match p.address_space.hosts.difference(minus) {
        Difference::Space(hosts) => ResolutionAction::UpdateAddressSpace {
            id,
            address_space: AddressSpace { hosts, waypoints: p.address_space.waypoints.clone() },
        },
        Difference::Empty => ResolutionAction::RemovePolicy { id, lossy: false },
        Difference::Unrepresentable => ResolutionAction::RemovePolicy { id, lossy: true },
    };
    Ok(match class {
        ConflictClass::NoConflict => return Err(ConflictError::InvalidClass),
        ConflictClass::Redundancy | ConflictClass::Shadowing => {
            ResolutionAction::RemovePolicy { id: id_i, lossy: false }
        }
        ConflictClass::Generalization => narrowed(id_i, pi, &pj.address_space.hosts),
        ConflictClass::Correlation => {
            if pi.priority <= pj.priority {
                narrowed(id_i, pi, &pj.address_space.hosts)
            } else {
                narrowed(id_j, pj, &pi.address_space.hosts)
            }
        }
        ConflictClass::Overlap => {
            // The merge keeps the stronger policy's priority, waypoints and
            // traffic conditions.
            let mut merged = if pj.priority > pi.priority { pj.clone() } else { pi.clone() };
            merged.address_space.hosts = pi.address_space.hosts.union(&pj.address_space.hosts);
            ResolutionAction::ReplaceBoth { remove: (id_i, id_j), insert: merged }
        }
    })
}

/// Reports plus the number of ordered pairs that were classified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scan {
    pub reports: Vec<ConflictReport>,
    pub pairs_evaluated: usize,
}

/// Classifies every ordered pair of distinct policies in `store`.
pub fn scan(store: &PolicyStore, resolver: &impl HostResolver) -> Result<Scan, ConflictError> {
    let policies: Vec<(PolicyId, &Policy)> = store.iter().collect();
    for &(id, p) in &policies {
        check_hosts(id, p, resolver)?;
    }
    let mut reports = Vec::new();
    let mut pairs_evaluated = 0;
    let mut overlaps = BTreeSet::new();
    for &(id_i, pi) in &policies {
        for &(id_j, pj) in &policies {
            if id_i == id_j {
                continue;
            }
            pairs_evaluated += 1;
            let class = classify_pair(pi, pj);
            if class == ConflictClass::NoConflict {
                continue;
            }
            let (first, second) = if class == ConflictClass::Overlap {
                // Symmetric: keep one report, lower id first.
                let key = (id_i.min(id_j), id_i.max(id_j));
                if !overlaps.insert(key) {
                    continue;
                }
                if id_i < id_j {
                    ((id_i, pi), (id_j, pj))
                } else {
                    ((id_j, pj), (id_i, pi))
                }
            } else {
                ((id_i, pi), (id_j, pj))
            };
            let resolution = recommend(first, second, class)?;
            reports.push(ConflictReport { first: first.0, second: second.0, class, resolution });
        }
    }
    reports.sort_by_key(|r| (r.first, r.second));
    Ok(Scan { reports, pairs_evaluated })
}

/// All conflicts among the store's policies, ordered by `(first, second)`.
pub fn detect_all(store: &PolicyStore, resolver: &impl HostResolver) -> Result<Vec<ConflictReport>, ConflictError> {
    scan(store, resolver).map(|s| s.reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_policy;
    use alloc::vec;

    fn p(text: &str) -> Policy {
        parse_policy(text).unwrap()
    }

    // The five worked examples, in (Pi, Pj) order.
    fn redundancy() -> (Policy, Policy) {
        (p("route WEB in A priority 100 between (H1,H2)"), p("route WEB in A priority 100"))
    }
    fn shadowing() -> (Policy, Policy) {
        (p("route VIDEO from A to B priority 100"), p("alert VIDEO from A to B priority 200"))
    }
    fn generalization() -> (Policy, Policy) {
        (p("route VOICE in A priority 200"), p("alert VOICE in A priority 300 between (H3,H4)"))
    }
    fn correlation() -> (Policy, Policy) {
        (
            p("route WEB in A priority 100 between (H1,H2),(H1,H3)"),
            p("alert WEB in A priority 200 between (H1,H2),(H2,H4)"),
        )
    }
    fn overlap() -> (Policy, Policy) {
        (
            p("route WEB from A to B priority 100 between (H1,H4),(H2,H3)"),
            p("route WEB from A to B priority 200 between (H1,H4),(H2,H5)"),
        )
    }

    #[test]
    fn worked_examples() {
        let cases = [
            (redundancy(), ConflictClass::Redundancy),
            (shadowing(), ConflictClass::Shadowing),
            (generalization(), ConflictClass::Generalization),
            (correlation(), ConflictClass::Correlation),
            (overlap(), ConflictClass::Overlap),
        ];
        for ((a, b), expected) in cases {
            assert_eq!(classify_pair(&a, &b), expected, "{a} / {b}");
        }
        assert_eq!(classify_pair(&p("route WEB in A"), &p("route VIDEO in A")), ConflictClass::NoConflict);
        assert_eq!(classify_pair(&p("route WEB in A"), &p("route WEB in B")), ConflictClass::NoConflict);
    }

    #[test]
    fn recommendations_for_examples() {
        let (a, b) = redundancy();
        assert_eq!(
            recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::Redundancy).unwrap(),
            ResolutionAction::RemovePolicy { id: PolicyId(1), lossy: false }
        );

        let (a, b) = overlap();
        match recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::Overlap).unwrap() {
            ResolutionAction::ReplaceBoth { remove, insert } => {
                assert_eq!(remove, (PolicyId(1), PolicyId(2)));
                assert_eq!(insert.address_space.hosts, HostSpace::pairs([("H1", "H4"), ("H2", "H3"), ("H2", "H5")]));
                assert_eq!(insert.priority, 200);
            }
            other => panic!("unexpected {other:?}"),
        }

        let (a, b) = generalization();
        assert_eq!(
            recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::Generalization).unwrap(),
            ResolutionAction::RemovePolicy { id: PolicyId(1), lossy: true }
        );

        let (a, b) = correlation();
        assert_eq!(
            recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::Correlation).unwrap(),
            ResolutionAction::UpdateAddressSpace {
                id: PolicyId(1),
                address_space: AddressSpace::with_hosts(HostSpace::pairs([("H1", "H3")])),
            }
        );

        assert_eq!(
            recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::NoConflict),
            Err(ConflictError::InvalidClass)
        );
    }

    #[test]
    fn finite_generalization_narrows() {
        let a = p("route WEB in A priority 1 between (H1,H2),(H3,H4)");
        let b = p("alert WEB in A priority 2 between (H3,H4)");
        assert_eq!(classify_pair(&a, &b), ConflictClass::Generalization);
        let action = recommend((PolicyId(1), &a), (PolicyId(2), &b), ConflictClass::Generalization).unwrap();
        let ResolutionAction::UpdateAddressSpace { address_space, .. } = &action else { panic!("{action:?}") };
        assert_eq!(address_space.hosts, HostSpace::pairs([("H1", "H2")]));
        let mut a2 = a.clone();
        a2.address_space = address_space.clone();
        assert_eq!(classify_pair(&a2, &b), ConflictClass::NoConflict);
    }

    #[test]
    fn row_precedence() {
        // Equal spaces and priorities under the same operation are redundant
        // both ways, never overlapping.
        let a = p("route WEB in A between (H1,H2)");
        assert_eq!(classify_pair(&a, &a.clone()), ConflictClass::Redundancy);
        // Equal spaces, different operations, strict priority: shadowing wins
        // over generalization.
        let b = p("alert WEB in A priority 20 between (H1,H2)");
        assert_eq!(classify_pair(&a, &b), ConflictClass::Shadowing);
        assert_eq!(classify_pair(&b, &a), ConflictClass::NoConflict);
        // Correlation allows equal priority.
        let c = p("route WEB in A between (H1,H2),(H1,H3)");
        let d = p("alert WEB in A between (H1,H2),(H2,H4)");
        assert_eq!(classify_pair(&c, &d), ConflictClass::Correlation);
        assert_eq!(classify_pair(&d, &c), ConflictClass::Correlation);
    }

    #[test]
    fn detect_examples_together() {
        let mut store = PolicyStore::new();
        // Distinct profiles or regions per pair keep the pairs independent.
        let pairs = vec![
            redundancy(),
            shadowing(),
            generalization(),
            (
                p("route VIDEO in C priority 100 between (H1,H2),(H1,H3)"),
                p("alert VIDEO in C priority 200 between (H1,H2),(H2,H4)"),
            ),
            overlap(),
        ];
        for (a, b) in pairs {
            store.add(a).unwrap();
            store.add(b).unwrap();
        }
        let scan = scan(&store, &Unchecked).unwrap();
        assert_eq!(scan.pairs_evaluated, 10 * 9);
        let got: Vec<_> = scan.reports.iter().map(|r| (r.first.0, r.second.0, r.class)).collect();
        assert_eq!(
            got,
            vec![
                (1, 2, ConflictClass::Redundancy),
                (3, 4, ConflictClass::Shadowing),
                (5, 6, ConflictClass::Generalization),
                (7, 8, ConflictClass::Correlation),
                (9, 10, ConflictClass::Overlap),
            ]
        );
        assert_eq!(scan.reports[0].to_string(), "Redundancy P1 vs P2: remove P1");
        assert_eq!(scan.reports[3].to_string(), "Correlation P7 vs P8: restrict P7 to between (H1,H3)");
        assert_eq!(
            scan.reports[4].to_string(),
            "Overlap P9 vs P10: replace P9 and P10 with `route WEB from A to B priority 200 between (H1,H4),(H2,H3),(H2,H5)`"
        );
    }

    #[test]
    fn overlap_reported_once_lower_id_first() {
        let mut store = PolicyStore::new();
        let (a, b) = overlap();
        store.add(b).unwrap();
        store.add(a).unwrap();
        let reports = detect_all(&store, &Unchecked).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!((reports[0].first, reports[0].second), (PolicyId(1), PolicyId(2)));
    }

    #[test]
    fn empty_store_has_no_conflicts() {
        assert!(detect_all(&PolicyStore::new(), &Unchecked).unwrap().is_empty());
    }

    struct OnlyRegionA;
    impl HostResolver for OnlyRegionA {
        fn resolves(&self, host: &str, regions: &[&str]) -> bool {
            regions.contains(&"A") && host.starts_with('H')
        }
    }

    #[test]
    fn unresolvable_host() {
        let mut store = PolicyStore::new();
        store.add(p("route WEB in A between (H1,H2)")).unwrap();
        let bad = store.add(p("route WEB in A between (H1,X9)")).unwrap();
        assert_eq!(
            detect_all(&store, &OnlyRegionA),
            Err(ConflictError::UnresolvableHost { policy: bad, host: "X9".into() })
        );
    }

    #[test]
    fn apply_actions() {
        let mut store = PolicyStore::new();
        let (a, b) = overlap();
        let ia = store.add(a.clone()).unwrap();
        let ib = store.add(b.clone()).unwrap();
        let action = recommend((ia, &a), (ib, &b), ConflictClass::Overlap).unwrap();
        let merged = action.apply(&mut store).unwrap().unwrap();
        assert_eq!(store.len(), 1);
        assert!(store.contains(merged));
        assert!(detect_all(&store, &Unchecked).unwrap().is_empty());

        let mut store = PolicyStore::new();
        let (a, b) = correlation();
        let ia = store.add(a.clone()).unwrap();
        let ib = store.add(b.clone()).unwrap();
        recommend((ia, &a), (ib, &b), ConflictClass::Correlation).unwrap().apply(&mut store).unwrap();
        assert!(detect_all(&store, &Unchecked).unwrap().is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Small universe: one app, one region, four hosts, so classes are dense.
        prop_compose! {
            fn small()(
                alert in any::<bool>(),
                priority in 1u32..4,
                pairs in prop::option::of(prop::collection::btree_set((1u8..5, 1u8..5), 1..5)),
            ) -> Policy {
                let op = if alert { "alert" } else { "route" };
                let mut text = alloc::format!("{op} WEB in A priority {priority}");
                if let Some(pairs) = pairs {
                    let list: Vec<String> = pairs
                        .iter()
                        .filter(|(a, b)| a != b)
                        .map(|(a, b)| alloc::format!("(H{a},H{b})"))
                        .collect();
                    if !list.is_empty() {
                        text.push_str(" between ");
                        text.push_str(&list.join(","));
                    }
                }
                parse_policy(&text).unwrap()
            }
        }

        proptest! {
            #[test]
            fn overlap_is_symmetric(a in small(), b in small()) {
                let (ab, ba) = (classify_pair(&a, &b), classify_pair(&b, &a));
                prop_assert_eq!(ab == ConflictClass::Overlap, ba == ConflictClass::Overlap);
            }

            #[test]
            fn operation_equality_splits_the_classes(a in small(), b in small()) {
                let same_op = a.operation == b.operation;
                match classify_pair(&a, &b) {
                    ConflictClass::Redundancy | ConflictClass::Overlap => prop_assert!(same_op),
                    ConflictClass::Shadowing | ConflictClass::Generalization | ConflictClass::Correlation => {
                        prop_assert!(!same_op)
                    }
                    ConflictClass::NoConflict => {}
                }
            }

            #[test]
            fn resolution_clears_the_conflict(a in small(), b in small()) {
                let class = classify_pair(&a, &b);
                prop_assume!(class != ConflictClass::NoConflict);
                let mut store = PolicyStore::new();
                let ia = store.add(a.clone()).unwrap();
                let ib = store.add(b.clone()).unwrap();
                let action = recommend((ia, &a), (ib, &b), class).unwrap();
                action.apply(&mut store).unwrap();
                if action.is_lossy() {
                    prop_assert_eq!(class, ConflictClass::Generalization);
                    prop_assert!(a.address_space.hosts.is_all());
                }
                let left: Vec<&Policy> = store.iter().map(|(_, p)| p).collect();
                if let [x, y] = left.as_slice() {
                    prop_assert_eq!(classify_pair(x, y), ConflictClass::NoConflict);
                    prop_assert_eq!(classify_pair(y, x), ConflictClass::NoConflict);
                }
            }

            #[test]
            fn scan_visits_every_ordered_pair(ps in prop::collection::vec(small(), 0..12)) {
                let mut store = PolicyStore::new();
                for p in &ps {
                    store.add(p.clone()).unwrap();
                }
                let n = ps.len();
                prop_assert_eq!(scan(&store, &Unchecked).unwrap().pairs_evaluated, n * n.saturating_sub(1));
            }
        }
    }
}
