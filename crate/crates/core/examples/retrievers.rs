//! Compare the four retrievers on the synthetic test split: mean SCS between
//! each test turn and its top-1 retrieved example, plus a sample query.
//!
//! The embedding retriever reads vectors from a file; here they are hashed
//! bag-of-words vectors written by the example itself, standing in for a
//! trained sentence encoder.
//!
//! cargo run --example retrievers

use slotqa::corpus::{Split, TurnRecord};
use slotqa::jsonl;
use slotqa::retrieval::{load_embeddings, Bm25Params, EmbeddingRecord, ExampleDatabase, QueryText, Retriever};
use slotqa::similarity::{scs, turn_delta};
use slotqa::synthetic::{generate, SyntheticConfig};
use slotqa::text::{SimpleTokenizer, Tokenizer};

const DIM: usize = 64;

fn hashed_bow(turn: &TurnRecord) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    for tok in SimpleTokenizer.tokenize(QueryText::from_turn(turn).as_str()) {
        let h = tok.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3));
        v[(h % DIM as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter().map(|x| x / norm).collect()
}

fn main() -> slotqa::Result<()> {
    let data = generate(&SyntheticConfig::default())?;
    let all = |s: Split| data.corpora.iter().flat_map(move |c| c.turns(s));

    let emb_path = std::env::temp_dir().join("slotqa-embeddings.jsonl");
    jsonl::write(
        &emb_path,
        all(Split::Train).chain(all(Split::Test)).map(|t| EmbeddingRecord {
            dialogue_id: t.dialogue_id.clone(),
            turn_index: t.turn_index,
            vector: hashed_bow(t),
        }),
    )?;

    let mut db = ExampleDatabase::new(Bm25Params::default());
    db.extend(all(Split::Train));
    db.set_embeddings(load_embeddings(&emb_path)?);
    println!("database: {} train turns", db.len());

    let retrievers = [
        Retriever::Random { seed: 7 },
        Retriever::Bm25,
        Retriever::Embedding,
        Retriever::Oracle,
    ];
    for r in &retrievers {
        let mut total = 0.0;
        let mut n = 0;
        for t in all(Split::Test) {
            let top = db.retrieve(t, r, 1)?;
            total += scs(&turn_delta(t), &turn_delta(top[0]));
            n += 1;
        }
        println!("{:>9}: mean top-1 SCS {:.3} over {n} test turns", r.name(), total / n as f64);
    }

    let target = all(Split::Test).nth(5).expect("test turns");
    println!("\nquery {}: \"{}\"", target.id(), QueryText::from_turn(target).as_str());
    for r in &retrievers {
        let ids: Vec<String> = db.retrieve(target, r, 3)?.iter().map(|t| t.id().to_string()).collect();
        println!("{:>9}: {}", r.name(), ids.join("  "));
    }
    Ok(())
}
