//! The set of active policies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::policy::{
    parse_policy_with, render_policy, ApplicationRegistry, OperationClass, Policy, PolicyError, PolicyId, SemanticError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("policy {0} already exists")]
    DuplicateId(PolicyId),
    #[error("policy {0} not found")]
    NotFound(PolicyId),
    #[error("invalid policy: {0}")]
    Invalid(#[from] SemanticError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: missing policy statement")]
    MissingStatement { line: usize },
    #[error("line {line}: bad policy id `{text}`")]
    BadId { line: usize, text: String },
    #[error("line {line}: duplicate policy id {id}")]
    DuplicateId { line: usize, id: PolicyId },
    #[error("line {line}: {source}")]
    Policy { line: usize, source: PolicyError },
    #[error("line {line}: not terminated by a newline (truncated file?)")]
    Unterminated { line: usize },
}

/// Active policies keyed by id, iterated in id order.
///
/// Every mutation bumps [`PolicyStore::revision`]. Equality compares the
/// policies only; the revision counter is bookkeeping and is not persisted.
#[derive(Clone, Debug, Default)]
pub struct PolicyStore {
    policies: BTreeMap<PolicyId, Policy>,
    revision: u64,
    next_id: u64,
}

impl PartialEq for PolicyStore {
    fn eq(&self, other: &Self) -> bool {
        self.policies == other.policies
    }
}

impl Eq for PolicyStore {}

impl PolicyStore {
    pub fn new() -> Self {
        PolicyStore { policies: BTreeMap::new(), revision: 0, next_id: 1 }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Adds `policy` under the next sequential id.
    pub fn add(&mut self, policy: Policy) -> Result<PolicyId, StoreError> {
        policy.validate()?;
        let id = PolicyId(self.next_id.max(1));
        self.insert_unchecked(id, policy);
        Ok(id)
    }

    /// Adds `policy` under a caller-chosen id.
    pub fn insert(&mut self, id: PolicyId, policy: Policy) -> Result<(), StoreError> {
        policy.validate()?;
        if self.policies.contains_key(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        self.insert_unchecked(id, policy);
        Ok(())
    }

    fn insert_unchecked(&mut self, id: PolicyId, policy: Policy) {
        self.policies.insert(id, policy);
        self.next_id = self.next_id.max(id.0 + 1);
        self.revision += 1;
    }

    pub fn update(&mut self, id: PolicyId, policy: Policy) -> Result<Policy, StoreError> {
        policy.validate()?;
        let slot = self.policies.get_mut(&id).ok_or(StoreError::NotFound(id))?;
        let old = core::mem::replace(slot, policy);
        self.revision += 1;
        Ok(old)
    }

    pub fn remove(&mut self, id: PolicyId) -> Result<Policy, StoreError> {
        let policy = self.policies.remove(&id).ok_or(StoreError::NotFound(id))?;
        self.revision += 1;
        Ok(policy)
    }

    pub fn get(&self, id: PolicyId) -> Option<&Policy> {
        self.policies.get(&id)
    }

    pub fn contains(&self, id: PolicyId) -> bool {
        self.policies.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PolicyId, &Policy)> {
        self.policies.iter().map(|(id, p)| (*id, p))
    }

    pub fn ids(&self) -> impl Iterator<Item = PolicyId> + '_ {
        self.policies.keys().copied()
    }

    /// Policies whose operation falls in `class`, in id order.
    pub fn filter_by_operation(&self, class: OperationClass) -> Vec<(PolicyId, &Policy)> {
        self.iter().filter(|(_, p)| p.operation.class() == class).collect()
    }

    /// One `<id> <statement>` line per policy, each LF-terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, policy) in self.iter() {
            let _ = writeln!(out, "{} {}", id.0, render_policy(policy));
        }
        out
    }

    /// Inverse of [`PolicyStore::to_text`]. Blank lines are skipped; a final
    /// line without its newline is treated as truncation.
    pub fn from_text(text: &str, registry: &ApplicationRegistry) -> Result<Self, FormatError> {
        let mut store = PolicyStore::new();
        let mut rest = text;
        let mut line_no = 0;
        while !rest.is_empty() {
            line_no += 1;
            let Some(nl) = rest.find('\n') else {
                return Err(FormatError::Unterminated { line: line_no });
            };
            let line = rest[..nl].trim_end_matches('\r');
            rest = &rest[nl + 1..];
            if line.trim().is_empty() {
                continue;
            }
            let line = line.trim_start();
            let (id_text, statement) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let id: u64 = id_text
                .strip_prefix('P')
                .unwrap_or(id_text)
                .parse()
                .map_err(|_| FormatError::BadId { line: line_no, text: id_text.into() })?;
            if statement.trim().is_empty() {
                return Err(FormatError::MissingStatement { line: line_no });
            }
            let policy = parse_policy_with(statement, registry)
                .map_err(|source| FormatError::Policy { line: line_no, source })?;
            let id = PolicyId(id);
            if store.contains(id) {
                return Err(FormatError::DuplicateId { line: line_no, id });
            }
            store.insert_unchecked(id, policy);
        }
        store.revision = 0;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{parse_policy, OperationKind, Span};

    fn p(text: &str) -> Policy {
        parse_policy(text).unwrap()
    }

    #[test]
    fn add_and_list() {
        let mut store = PolicyStore::new();
        assert!(store.is_empty());
        let a = store.add(p("route WEB in A")).unwrap();
        assert_eq!(store.len(), 1);
        let b = store.add(p("alert VIDEO in A")).unwrap();
        assert!(a < b);
        let ids: Vec<_> = store.ids().collect();
        assert_eq!(ids, vec![a, b]);
        assert_eq!(store.revision(), 2);
    }

    #[test]
    fn thousand_adds() {
        let mut store = PolicyStore::new();
        let before = store.revision();
        for i in 0..1000u32 {
            store.add(p(&alloc::format!("route WEB in A priority {}", i + 1))).unwrap();
        }
        assert_eq!(store.len(), 1000);
        assert_eq!(store.revision() - before, 1000);
    }

    #[test]
    fn duplicate_and_missing_ids() {
        let mut store = PolicyStore::new();
        store.insert(PolicyId(7), p("route WEB in A")).unwrap();
        assert_eq!(store.insert(PolicyId(7), p("route WEB in B")), Err(StoreError::DuplicateId(PolicyId(7))));
        // Sequential ids continue past caller-supplied ones.
        assert_eq!(store.add(p("route WEB in B")).unwrap(), PolicyId(8));
        assert_eq!(store.remove(PolicyId(99)), Err(StoreError::NotFound(PolicyId(99))));
        let removed = store.remove(PolicyId(7)).unwrap();
        assert_eq!(removed, p("route WEB in A"));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn add_then_remove_empties() {
        let mut store = PolicyStore::new();
        let id = store.add(p("route WEB in A")).unwrap();
        store.remove(id).unwrap();
        assert!(store.is_empty());
        assert_eq!(store.revision(), 2);
    }

    #[test]
    fn failover_remove_primary() {
        let mut store = PolicyStore::new();
        let primary = store.add(p("route WEB in C priority 100 via S3:2")).unwrap();
        let backup = store.add(p("route WEB in C priority 50 via S6:4")).unwrap();
        store.remove(primary).unwrap();
        let left: Vec<_> = store.iter().map(|(id, p)| (id, p.clone())).collect();
        assert_eq!(left, vec![(backup, p("route WEB in C priority 50 via S6:4"))]);
    }

    #[test]
    fn update_bumps_revision() {
        let mut store = PolicyStore::new();
        let id = store.add(p("route WEB in A")).unwrap();
        let old = store.update(id, p("route WEB in A priority 3")).unwrap();
        assert_eq!(old.priority, 10);
        assert_eq!(store.get(id).unwrap().priority, 3);
        assert_eq!(store.revision(), 2);
        assert!(store.update(PolicyId(42), p("route WEB in A")).is_err());
    }

    #[test]
    fn filter_by_class() {
        let mut store = PolicyStore::new();
        let route = store.add(p("route WEB in A")).unwrap();
        store.add(p("alert WEB in A")).unwrap();
        let routes = store.filter_by_operation(OperationClass { kind: OperationKind::Route, span: Span::Intra });
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].0, route);
        assert!(PolicyStore::new()
            .filter_by_operation(OperationClass { kind: OperationKind::Route, span: Span::Intra })
            .is_empty());
    }

    #[test]
    fn qos_counts_as_route() {
        let mut store = PolicyStore::new();
        store.add(p("route WEB from IT to Sales ratelimit 200mbps")).unwrap();
        let inter = store.filter_by_operation(OperationClass { kind: OperationKind::Route, span: Span::Inter });
        assert_eq!(inter.len(), 1);
    }

    #[test]
    fn text_round_trip() {
        let registry = ApplicationRegistry::default();
        let empty = PolicyStore::new();
        assert_eq!(PolicyStore::from_text(&empty.to_text(), &registry).unwrap(), empty);

        let mut store = PolicyStore::new();
        store.add(p("route WEB in A between (H1,H3),(H1,H5),(H3,H5)")).unwrap();
        store.add(p("route VIDEO from IT to Sales via Sales-S1:3")).unwrap();
        store.add(p("route WEB from IT to Sales priority 3 ratelimit 200mbps")).unwrap();
        let text = store.to_text();
        assert_eq!(
            text,
            "1 route WEB in A between (H1,H3),(H1,H5),(H3,H5)\n\
             2 route VIDEO from IT to Sales via Sales-S1:3\n\
             3 route WEB from IT to Sales priority 3 ratelimit 200mbps\n"
        );
        let back = PolicyStore::from_text(&text, &registry).unwrap();
        assert_eq!(back, store);
        let mut back = back;
        assert_eq!(back.add(p("route WEB in Z")).unwrap(), PolicyId(4));
    }

    #[test]
    fn truncated_text_is_rejected() {
        let registry = ApplicationRegistry::default();
        let mut store = PolicyStore::new();
        store.add(p("route WEB in A between (H1,H3)")).unwrap();
        store.add(p("route VIDEO in A")).unwrap();
        let text = store.to_text();
        for cut in 1..text.len() - 1 {
            if text.as_bytes()[cut - 1] == b'\n' {
                continue;
            }
            assert!(PolicyStore::from_text(&text[..cut], &registry).is_err(), "accepted prefix {:?}", &text[..cut]);
        }
        assert!(matches!(
            PolicyStore::from_text("1 route WEB in\n", &registry),
            Err(FormatError::Policy { line: 1, .. })
        ));
        assert!(matches!(
            PolicyStore::from_text("x route WEB in A\n", &registry),
            Err(FormatError::BadId { line: 1, .. })
        ));
        assert!(matches!(
            PolicyStore::from_text("1 route WEB in A\n1 route WEB in B\n", &registry),
            Err(FormatError::DuplicateId { line: 2, .. })
        ));
    }

    #[derive(Clone, Debug)]
    enum Op {
        Add(Policy),
        Remove(usize),
        Update(usize, Policy),
    }

    fn op() -> impl proptest::strategy::Strategy<Value = Op> {
        use proptest::prelude::*;
        prop_oneof![
            3 => crate::testutil::arb_policy().prop_map(Op::Add),
            1 => any::<usize>().prop_map(Op::Remove),
            1 => (any::<usize>(), crate::testutil::arb_policy()).prop_map(|(i, p)| Op::Update(i, p)),
        ]
    }

    proptest::proptest! {
        #[test]
        fn mutations_match_a_plain_map(ops in proptest::collection::vec(op(), 0..24)) {
            let mut store = PolicyStore::new();
            let mut model: alloc::collections::BTreeMap<u64, Policy> = Default::default();
            let mut next = 1;
            for op in ops {
                let ids: Vec<u64> = model.keys().copied().collect();
                match op {
                    Op::Add(p) => {
                        proptest::prop_assert_eq!(store.add(p.clone()), Ok(PolicyId(next)));
                        model.insert(next, p);
                        next += 1;
                    }
                    Op::Remove(i) if !ids.is_empty() => {
                        let id = ids[i % ids.len()];
                        proptest::prop_assert_eq!(store.remove(PolicyId(id)), Ok(model.remove(&id).unwrap()));
                    }
                    Op::Update(i, p) if !ids.is_empty() => {
                        let id = ids[i % ids.len()];
                        let old = model.insert(id, p.clone()).unwrap();
                        proptest::prop_assert_eq!(store.update(PolicyId(id), p), Ok(old));
                    }
                    Op::Remove(_) | Op::Update(..) => {
                        proptest::prop_assert!(store.remove(PolicyId(next)).is_err());
                    }
                }
            }
            let got: Vec<(u64, Policy)> = store.iter().map(|(id, p)| (id.0, p.clone())).collect();
            let want: Vec<(u64, Policy)> = model.into_iter().collect();
            proptest::prop_assert_eq!(got, want);
        }

        #[test]
        fn any_store_survives_persistence(policies in proptest::collection::vec(crate::testutil::arb_policy(), 0..12),
                                          drop_mask in proptest::num::u16::ANY) {
            let mut store = PolicyStore::new();
            for p in policies {
                store.add(p).unwrap();
            }
            let ids: Vec<PolicyId> = store.ids().collect();
            for (i, id) in ids.into_iter().enumerate() {
                if drop_mask & (1 << i) != 0 {
                    store.remove(id).unwrap();
                }
            }
            let back = PolicyStore::from_text(&store.to_text(), &ApplicationRegistry::default());
            proptest::prop_assert_eq!(back, Ok(store));
        }
    }
}
