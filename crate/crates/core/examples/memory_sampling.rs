//! Draw replay memories with each sampling strategy and compare how many
//! dialogues they touch.
//!
//! cargo run --example memory_sampling

use std::collections::BTreeSet;

use slotqa::corpus::Split;
use slotqa::memory::{MemoryBudget, SamplingStrategy};
use slotqa::synthetic::{generate, SyntheticConfig};

fn main() -> slotqa::Result<()> {
    let data = generate(&SyntheticConfig {
        train_dialogues: 40,
        min_turns: 8,
        max_turns: 14,
        ..SyntheticConfig::default()
    })?;
    let hotel = data.corpus("hotel").expect("generated");
    let dialogues = hotel.dialogues(Split::Train);
    println!("{} dialogues, {} turns available\n", dialogues.len(), hotel.turns(Split::Train).count());

    println!("{:<14} {:>4} {:>6} {:>10}", "strategy", "M", "turns", "dialogues");
    for strategy in [SamplingStrategy::Turn, SamplingStrategy::Dialogue, SamplingStrategy::DialogueFair] {
        for m in [10, 50, 100] {
            let budget = MemoryBudget {
                m,
                strategy,
                seed: 42,
                ..MemoryBudget::default()
            };
            let turns = budget.sample(dialogues);
            let touched: BTreeSet<&str> = turns.iter().map(|t| t.dialogue_id.as_str()).collect();
            println!("{:<14} {m:>4} {:>6} {:>10}", format!("{strategy:?}"), turns.len(), touched.len());
        }
    }

    let budget = MemoryBudget {
        m: 10,
        strategy: SamplingStrategy::Dialogue,
        seed: 42,
        ..MemoryBudget::default()
    };
    let ids: Vec<String> = budget.sample(dialogues).iter().map(|t| t.id().to_string()).collect();
    println!("\ndialogue-level sample, M=10, seed 42:\n  {}", ids.join(" "));
    Ok(())
}
