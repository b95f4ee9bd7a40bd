//! Rank training turns by state-change similarity to one test turn.
//!
//! cargo run --example oracle_ranking

use slotqa::corpus::{Split, TurnRecord};
use slotqa::retrieval::{Bm25Params, ExclusionPolicy};
use slotqa::similarity::{oracle_rank, turn_delta};
use slotqa::synthetic::{generate, SyntheticConfig};
use slotqa::text::SimpleTokenizer;

fn describe(turn: &TurnRecord) -> String {
    let parts: Vec<String> = turn_delta(turn)
        .entries()
        .map(|e| format!("{}={}", e.qualified_key(), e.value))
        .collect();
    if parts.is_empty() {
        "(no change)".into()
    } else {
        parts.join(", ")
    }
}

fn main() -> slotqa::Result<()> {
    let data = generate(&SyntheticConfig::default())?;
    let corpus = data.corpus("restaurant").expect("generated");
    let target = corpus
        .turns(Split::Test)
        .filter(|t| !turn_delta(t).is_empty())
        .nth(3)
        .expect("fixture has turns with state changes");
    println!("target {}  {}", target.id(), describe(target));
    println!("  \"{}\"\n", target.last_user().text);

    let policy = ExclusionPolicy::default();
    let candidates: Vec<&TurnRecord> = corpus
        .turns(Split::Train)
        .filter(|c| !policy.excludes(&target.id(), &c.id()))
        .collect();
    let ranked = oracle_rank(target, &candidates, &SimpleTokenizer, Bm25Params::default());
    for s in ranked.iter().take(8) {
        let turn = candidates.iter().find(|c| c.id() == s.candidate_id).unwrap();
        println!(
            "{:>8}  scs {:.3}  bm25 {:6.3}  {}",
            s.candidate_id.to_string(),
            s.scs,
            s.bm25_tiebreak,
            describe(turn)
        );
    }
    Ok(())
}
