//! Operation-qualified state changes between consecutive turns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueState, SlotKey};
use crate::text::{normalize, NONE_ANSWER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeltaOp {
    Insert,
    Update,
    Delete,
}

impl fmt::Display for DeltaOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaOp::Insert => "INSERT",
            DeltaOp::Update => "UPDATE",
            DeltaOp::Delete => "DELETE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub key: SlotKey,
    pub op: DeltaOp,
    /// Normalized; `"none"` for deletions.
    pub value: String,
}

impl DeltaEntry {
    /// `domain-slot⊕OP`
    pub fn qualified_key(&self) -> String {
        format!("{}⊕{}", self.key, self.op)
    }
}

/// At most one entry per slot key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateDelta(BTreeMap<SlotKey, (DeltaOp, String)>);

impl StateDelta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the entry for `key`; the value is normalized.
    pub fn set(&mut self, key: SlotKey, op: DeltaOp, value: &str) {
        let value = match op {
            DeltaOp::Delete => NONE_ANSWER.to_string(),
            _ => normalize(value),
        };
        self.0.insert(key, (op, value));
    }

    pub fn entries(&self) -> impl Iterator<Item = DeltaEntry> + '_ {
        self.0.iter().map(|(k, (op, v))| DeltaEntry {
            key: k.clone(),
            op: *op,
            value: v.clone(),
        })
    }

    pub fn get(&self, key: &SlotKey) -> Option<(DeltaOp, &str)> {
        self.0.get(key).map(|(op, v)| (*op, v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Applies the delta to `prev`: insertions and updates assign, deletions remove.
    pub fn apply(&self, prev: &DialogueState) -> DialogueState {
        let mut out = prev.clone();
        for (k, (op, v)) in &self.0 {
            match op {
                DeltaOp::Delete => {
                    out.remove(k);
                }
                DeltaOp::Insert | DeltaOp::Update => {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        out
    }
}

impl FromIterator<DeltaEntry> for StateDelta {
    fn from_iter<I: IntoIterator<Item = DeltaEntry>>(iter: I) -> Self {
        let mut d = StateDelta::new();
        for e in iter {
            d.set(e.key, e.op, &e.value);
        }
        d
    }
}

pub fn compute_delta(prev: &DialogueState, cur: &DialogueState) -> StateDelta {
    let mut delta = StateDelta::new();
    for (key, value) in cur.iter() {
        match prev.get(key) {
            None => delta.set(key.clone(), DeltaOp::Insert, value),
            Some(old) if normalize(old) != normalize(value) => {
                delta.set(key.clone(), DeltaOp::Update, value)
            }
            Some(_) => {}
        }
    }
    for key in prev.keys() {
        if !cur.contains(key) {
            delta.set(key.clone(), DeltaOp::Delete, NONE_ANSWER);
        }
    }
    delta
}

pub fn op_qualified_keys(delta: &StateDelta) -> BTreeSet<String> {
    delta.entries().map(|e| e.qualified_key()).collect()
}

/// `(domain-slot⊕OP, value)` pairs.
pub fn op_qualified_pairs(delta: &StateDelta) -> BTreeSet<(String, String)> {
    delta.entries().map(|e| (e.qualified_key(), e.value)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(s: &str) -> SlotKey {
        SlotKey::new("hotel", s)
    }

    fn state(pairs: &[(&str, &str)]) -> DialogueState {
        pairs.iter().map(|(k, v)| (key(k), v.to_string())).collect()
    }

    /// Brute-force set difference over the union of keys.
    fn diff_oracle(prev: &DialogueState, cur: &DialogueState) -> BTreeSet<(String, String, String)> {
        let keys: BTreeSet<&SlotKey> = prev.keys().chain(cur.keys()).collect();
        let mut out = BTreeSet::new();
        for k in keys {
            let row = match (prev.get(k), cur.get(k)) {
                (None, Some(v)) => Some(("INSERT", normalize(v))),
                (Some(a), Some(b)) if normalize(a) != normalize(b) => Some(("UPDATE", normalize(b))),
                (Some(_), None) => Some(("DELETE", "none".to_string())),
                _ => None,
            };
            if let Some((op, v)) = row {
                out.insert((k.to_string(), op.to_string(), v));
            }
        }
        out
    }

    fn as_rows(d: &StateDelta) -> BTreeSet<(String, String, String)> {
        d.entries()
            .map(|e| (e.key.to_string(), e.op.to_string(), e.value))
            .collect()
    }

    #[test]
    fn first_mention_is_insert() {
        let d = compute_delta(&state(&[]), &state(&[("stars", "3")]));
        assert_eq!(d.get(&key("stars")), Some((DeltaOp::Insert, "3")));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn identical_states_have_empty_delta() {
        let s = state(&[("stars", "3"), ("name", "Hilton")]);
        assert!(compute_delta(&s, &s).is_empty());
    }

    #[test]
    fn update_and_insert_against_oracle() {
        let prev = state(&[("stars", "3")]);
        let cur = state(&[("stars", "4"), ("name", "hilton")]);
        let d = compute_delta(&prev, &cur);
        let expected: BTreeSet<_> = [
            ("hotel-name".to_string(), "INSERT".to_string(), "hilton".to_string()),
            ("hotel-stars".to_string(), "UPDATE".to_string(), "4".to_string()),
        ]
        .into();
        assert_eq!(as_rows(&d), expected);
        assert_eq!(as_rows(&d), diff_oracle(&prev, &cur));
    }

    #[test]
    fn deletion_carries_none() {
        let d = compute_delta(&state(&[("name", "Hilton")]), &state(&[]));
        assert_eq!(d.get(&key("name")), Some((DeltaOp::Delete, "none")));
    }

    #[test]
    fn casing_noise_is_not_an_update() {
        let d = compute_delta(&state(&[("name", "Hilton")]), &state(&[("name", " HILTON ")]));
        assert!(d.is_empty());
    }

    #[test]
    fn qualified_key_rendering() {
        let d = compute_delta(&state(&[]), &state(&[("stars", "3")]));
        assert_eq!(
            op_qualified_keys(&d),
            BTreeSet::from(["hotel-stars⊕INSERT".to_string()])
        );
        assert!(op_qualified_keys(&StateDelta::new()).is_empty());

        let mut upd = StateDelta::new();
        upd.set(key("stars"), DeltaOp::Update, "3");
        assert!(op_qualified_keys(&d).is_disjoint(&op_qualified_keys(&upd)));
    }

    fn arb_state() -> impl Strategy<Value = DialogueState> {
        proptest::collection::btree_map(
            prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")],
            prop_oneof![Just("x"), Just("X "), Just("y"), Just("z z")],
            0..4,
        )
        .prop_map(|m| m.into_iter().map(|(k, v)| (key(k), v.to_string())).collect())
    }

    proptest! {
        #[test]
        fn delta_matches_oracle(prev in arb_state(), cur in arb_state()) {
            prop_assert_eq!(as_rows(&compute_delta(&prev, &cur)), diff_oracle(&prev, &cur));
        }

        #[test]
        fn replay_reconstructs_current(prev in arb_state(), cur in arb_state()) {
            let d = compute_delta(&prev, &cur);
            prop_assert!(d.apply(&prev).matches(&cur));
            prop_assert!(compute_delta(&cur, &cur).is_empty());
            prop_assert_eq!(op_qualified_keys(&d).len(), d.len());
        }
    }
}
