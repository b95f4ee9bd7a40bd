//! Generate a small synthetic corpus, write it out, load it back and print
//! the state delta of every turn of the first dialogue.
//!
//! cargo run --example ingest_and_delta -- [out_dir]

use slotqa::corpus::{load_corpus, Split};
use slotqa::similarity::turn_delta;
use slotqa::synthetic::{generate, SyntheticConfig};

fn main() -> slotqa::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("slotqa-ingest"));
    let data = generate(&SyntheticConfig::default())?;
    let files = data.write_to(&dir)?;
    for f in &files {
        println!("wrote {}", f.display());
    }

    let corpus = load_corpus(dir.join("hotel.jsonl"), dir.join("schema.json"))?;
    for split in [Split::Train, Split::Dev, Split::Test] {
        println!(
            "{split}: {} dialogues, {} turns",
            corpus.dialogues(split).len(),
            corpus.turns(split).count()
        );
    }

    let first = &corpus.dialogues(Split::Train)[0];
    println!("\ndialogue {}", first.dialogue_id);
    for turn in &first.turns {
        if let Some(sys) = turn.last_system() {
            println!("  system: {}", sys.text);
        }
        println!("  user:   {}", turn.last_user().text);
        for e in turn_delta(turn).entries() {
            println!("      {} = {}", e.qualified_key(), e.value);
        }
    }
    Ok(())
}
