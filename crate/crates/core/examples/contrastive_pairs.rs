//! Mine contrastive triplets for retriever training from the first service's
//! train split and show the SCS gap between positives and negatives.
//!
//! cargo run --example contrastive_pairs

use slotqa::corpus::{Split, TurnRecord};
use slotqa::retrieval::{mine_contrastive_pairs, PairExportOptions, PairingMode};
use slotqa::similarity::{scs, turn_delta};
use slotqa::synthetic::{generate, SyntheticConfig};
use slotqa::text::SimpleTokenizer;

fn main() -> slotqa::Result<()> {
    let data = generate(&SyntheticConfig {
        train_dialogues: 60,
        ..SyntheticConfig::default()
    })?;
    let first = data.corpus("hotel").expect("generated");
    let turns: Vec<&TurnRecord> = first.turns(Split::Train).collect();
    let by_id = |id: &slotqa::corpus::TurnId| turns.iter().find(|t| &t.id() == id).copied().unwrap();
    println!("{} candidate turns", turns.len());

    for mode in [PairingMode::CrossProduct, PairingMode::RankAligned] {
        let opts = PairExportOptions {
            mode,
            ..PairExportOptions::default()
        };
        let pairs = mine_contrastive_pairs(&turns, &SimpleTokenizer, &opts)?;
        let gap: f64 = pairs
            .iter()
            .map(|p| {
                let a = turn_delta(by_id(&p.anchor_id));
                scs(&a, &turn_delta(by_id(&p.positive_id))) - scs(&a, &turn_delta(by_id(&p.negative_id)))
            })
            .sum::<f64>()
            / pairs.len() as f64;
        println!(
            "{mode:?}: {} pairs ({} per anchor), mean SCS gap {gap:.3}",
            pairs.len(),
            pairs.len() / turns.len()
        );
        if mode == PairingMode::RankAligned {
            let p = &pairs[0];
            println!("\nanchor   {}: {}", p.anchor_id, p.anchor.as_str());
            println!("positive {}: {}", p.positive_id, p.positive.as_str());
            println!("negative {}: {}", p.negative_id, p.negative.as_str());
        }
    }
    Ok(())
}
