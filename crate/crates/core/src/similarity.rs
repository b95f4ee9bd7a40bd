//! State-change similarity (SCS) and the Oracle ranking built on it.
//!
//! SCS between two deltas is the mean of two F1 scores: one over
//! operation-qualified slot keys and one over operation-qualified
//! `(key, value)` pairs. Exact SCS ties (within [`SCS_TIE_TOLERANCE`]) are
//! broken by BM25 between the last system/user utterance pairs, then by
//! candidate id.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{TurnId, TurnRecord};
use crate::delta::{compute_delta, op_qualified_keys, op_qualified_pairs, StateDelta};
use crate::retrieval::bm25::{Bm25Index, Bm25Params};
use crate::retrieval::QueryText;
use crate::text::Tokenizer;

pub const SCS_TIE_TOLERANCE: f64 = 1e-9;

pub fn f1_overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let m = a.intersection(b).count();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / a.len() as f64;
    let r = m as f64 / b.len() as f64;
    2.0 * p * r / (p + r)
}

/// 1.0 when both deltas are empty.
pub fn scs(da: &StateDelta, db: &StateDelta) -> f64 {
    if da.is_empty() && db.is_empty() {
        return 1.0;
    }
    let f_slot = f1_overlap(&op_qualified_keys(da), &op_qualified_keys(db));
    let f_value = f1_overlap(&op_qualified_pairs(da), &op_qualified_pairs(db));
    0.5 * (f_slot + f_value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub candidate_id: TurnId,
    pub scs: f64,
    pub bm25_tiebreak: f64,
}

pub fn turn_delta(turn: &TurnRecord) -> StateDelta {
    compute_delta(&turn.prev_state, &turn.state)
}

/// A candidate whose delta and query tokens are already computed.
#[derive(Debug, Clone)]
pub struct PreparedTurn {
    pub id: TurnId,
    pub delta: StateDelta,
    pub tokens: Vec<String>,
}

impl PreparedTurn {
    pub fn new<T: Tokenizer + ?Sized>(turn: &TurnRecord, tokenizer: &T) -> Self {
        PreparedTurn {
            id: turn.id(),
            delta: turn_delta(turn),
            tokens: tokenizer.tokenize(QueryText::from_turn(turn).as_str()),
        }
    }
}

/// Ranks `candidates` against `target`. The target itself is skipped if present.
pub fn oracle_rank<T: Tokenizer + ?Sized>(
    target: &TurnRecord,
    candidates: &[&TurnRecord],
    tokenizer: &T,
    params: Bm25Params,
) -> Vec<SimilarityScore> {
    let target = PreparedTurn::new(target, tokenizer);
    let prepared: Vec<PreparedTurn> = candidates
        .iter()
        .map(|c| PreparedTurn::new(c, tokenizer))
        .collect();
    let refs: Vec<&PreparedTurn> = prepared.iter().collect();
    rank_prepared(&target, &refs, params)
}

pub fn rank_prepared(
    target: &PreparedTurn,
    candidates: &[&PreparedTurn],
    params: Bm25Params,
) -> Vec<SimilarityScore> {
    let candidates: Vec<&PreparedTurn> = candidates
        .iter()
        .copied()
        .filter(|c| c.id != target.id)
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let docs: Vec<&[String]> = candidates.iter().map(|c| c.tokens.as_slice()).collect();
    let bm25 = Bm25Index::build(&docs, params)
        .expect("non-empty")
        .score_all(&target.tokens);

    let mut scored: Vec<SimilarityScore> = candidates
        .iter()
        .zip(bm25)
        .map(|(c, b)| SimilarityScore {
            candidate_id: c.id.clone(),
            scs: scs(&target.delta, &c.delta),
            bm25_tiebreak: b,
        })
        .collect();
    sort_scores(&mut scored);
    scored
}

/// Sorts by SCS descending (ties under tolerance), BM25 descending, id ascending.
pub fn sort_scores(scores: &mut [SimilarityScore]) {
    scores.sort_by(|a, b| b.scs.total_cmp(&a.scs));
    // Tie groups are anchored at their highest member so the grouping depends
    // only on the multiset of SCS values, not on input order.
    let mut groups = Vec::with_capacity(scores.len());
    let mut group = 0usize;
    let mut anchor = f64::INFINITY;
    for s in scores.iter() {
        if anchor.is_infinite() || anchor - s.scs > SCS_TIE_TOLERANCE {
            if anchor.is_finite() {
                group += 1;
            }
            anchor = s.scs;
        }
        groups.push(group);
    }
    let mut keyed: Vec<(usize, SimilarityScore)> = groups.into_iter().zip(scores.iter().cloned()).collect();
    keyed.sort_by(|(ga, a), (gb, b)| {
        ga.cmp(gb)
            .then_with(|| b.bm25_tiebreak.total_cmp(&a.bm25_tiebreak))
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    for (slot, (_, s)) in scores.iter_mut().zip(keyed) {
        *slot = s;
    }
}

/// Comparator matching [`sort_scores`] for two already-grouped scores; used in tests.
pub fn compare_scores(a: &SimilarityScore, b: &SimilarityScore) -> Ordering {
    if (a.scs - b.scs).abs() > SCS_TIE_TOLERANCE {
        b.scs.total_cmp(&a.scs)
    } else {
        b.bm25_tiebreak
            .total_cmp(&a.bm25_tiebreak)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueState, SlotKey, Utterance};
    use crate::delta::DeltaOp;
    use crate::text::SimpleTokenizer;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn delta(entries: &[(&str, DeltaOp, &str)]) -> StateDelta {
        let mut d = StateDelta::new();
        for (k, op, v) in entries {
            d.set(SlotKey::new("hotel", *k), *op, v);
        }
        d
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_overlap(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(f1_overlap(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(f1_overlap(&set(&["a", "b"]), &set(&["a", "c"])), 0.5);
        assert_eq!(f1_overlap(&set(&[]), &set(&["a"])), 0.0);
        assert_eq!(f1_overlap(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn scs_examples() {
        let a = delta(&[("stars", DeltaOp::Insert, "3"), ("area", DeltaOp::Insert, "east")]);
        assert_eq!(scs(&a, &a), 1.0);
        let b = delta(&[("stars", DeltaOp::Insert, "3"), ("name", DeltaOp::Insert, "hilton")]);
        assert_eq!(scs(&a, &b), 0.5);
        let ins = delta(&[("stars", DeltaOp::Insert, "3")]);
        let upd = delta(&[("stars", DeltaOp::Update, "3")]);
        assert_eq!(scs(&ins, &upd), 0.0);
        assert_eq!(scs(&StateDelta::new(), &StateDelta::new()), 1.0);
        assert_eq!(scs(&StateDelta::new(), &ins), 0.0);
    }

    fn turn(id: &str, idx: usize, sys: &str, user: &str, prev: &[(&str, &str)], cur: &[(&str, &str)]) -> TurnRecord {
        let st = |p: &[(&str, &str)]| -> DialogueState {
            p.iter().map(|(k, v)| (SlotKey::new("hotel", *k), v.to_string())).collect()
        };
        let mut history = vec![Utterance::user("hello")];
        for _ in 1..idx {
            history.push(Utterance::system(sys));
            history.push(Utterance::user(user));
        }
        if idx == 1 {
            history[0] = Utterance::user(user);
        }
        TurnRecord {
            dialogue_id: id.into(),
            turn_index: idx,
            domain: "hotel".into(),
            history,
            state: st(cur),
            prev_state: st(prev),
        }
    }

    #[test]
    fn identical_delta_ranks_first() {
        let target = turn("t", 1, "", "three stars", &[], &[("stars", "3")]);
        let same = turn("b", 1, "", "unrelated words", &[], &[("stars", "3")]);
        let other = turn("a", 1, "", "three stars", &[], &[("area", "east")]);
        let r = oracle_rank(&target, &[&other, &same], &SimpleTokenizer, Bm25Params::default());
        assert_eq!(r[0].candidate_id, same.id());
        assert_eq!(r[0].scs, 1.0);
        assert_eq!(r[1].scs, 0.0);
    }

    #[test]
    fn bm25_breaks_scs_ties() {
        let target = turn("t", 2, "which area", "somewhere quiet", &[], &[("area", "east")]);
        let plain = turn("a", 2, "okay then", "anything works", &[], &[("area", "west")]);
        let rare = turn("b", 2, "sure thing", "quiet place", &[], &[("area", "north")]);
        // Both candidates: SCS = 0.5 * (1 + 0) = 0.5.
        let r = oracle_rank(&target, &[&plain, &rare], &SimpleTokenizer, Bm25Params::default());
        assert_eq!(r[0].scs, 0.5);
        assert_eq!(r[1].scs, 0.5);
        assert_eq!(r[0].candidate_id, rare.id());
        assert!(r[0].bm25_tiebreak > r[1].bm25_tiebreak);
    }

    #[test]
    fn empty_candidates_give_empty_ranking() {
        let target = turn("t", 1, "", "x", &[], &[]);
        assert!(oracle_rank(&target, &[], &SimpleTokenizer, Bm25Params::default()).is_empty());
        assert!(oracle_rank(&target, &[&target], &SimpleTokenizer, Bm25Params::default()).is_empty());
    }

    #[test]
    fn tolerance_groups_near_equal_scs() {
        let mk = |id: &str, s: f64, b: f64| SimilarityScore {
            candidate_id: TurnId::new(id, 1),
            scs: s,
            bm25_tiebreak: b,
        };
        let mut v = vec![mk("a", 0.5, 0.1), mk("b", 0.5 + 1e-12, 0.0), mk("c", 0.5 - 1e-12, 0.9)];
        sort_scores(&mut v);
        let ids: Vec<_> = v.iter().map(|s| s.candidate_id.dialogue_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
