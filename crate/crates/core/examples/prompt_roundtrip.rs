//! Serialize a turn into per-slot QA prompts with one retrieved example, then
//! answer with gold values and fold the answers back into a dialogue state.
//!
//! cargo run --example prompt_roundtrip

use slotqa::corpus::Split;
use slotqa::promptgen::{aggregate_answers, build_instances, AnswerRecord, PromptOptions};
use slotqa::retrieval::{ExampleDatabase, Retriever};
use slotqa::synthetic::{generate, SyntheticConfig};

fn main() -> slotqa::Result<()> {
    let data = generate(&SyntheticConfig::default())?;
    let hotel = data.corpus("hotel").expect("generated");
    let db = ExampleDatabase::from_turns(hotel.turns(Split::Train));

    let target = hotel.turns(Split::Test).nth(2).expect("test turns");
    let instances = build_instances(target, &hotel.schema, &Retriever::Oracle, &db, 1, PromptOptions::default())?;
    for inst in &instances {
        println!("[{}] gold={:?}\n  {}\n", inst.instance_id, inst.gold_answer, inst.prompt);
    }

    let answers: Vec<AnswerRecord> = instances
        .iter()
        .map(|i| AnswerRecord {
            instance_id: i.instance_id.clone(),
            answer: i.gold_answer.clone(),
        })
        .collect();
    let state = aggregate_answers(&answers, &hotel.schema)?;
    println!("predicted state: {state:?}");
    println!("gold state:      {:?}", target.state);
    println!("match: {}", state.matches(&target.state));

    let mut exact = 0;
    let mut total = 0;
    for t in hotel.turns(Split::Test) {
        let inst = build_instances(t, &hotel.schema, &Retriever::Bm25, &db, 2, PromptOptions::default())?;
        let ans: Vec<AnswerRecord> = inst
            .iter()
            .map(|i| AnswerRecord {
                instance_id: i.instance_id.clone(),
                answer: i.gold_answer.clone(),
            })
            .collect();
        exact += usize::from(aggregate_answers(&ans, &hotel.schema)?.matches(&t.state));
        total += 1;
    }
    println!("gold round trip over the test split: {exact}/{total}");
    Ok(())
}
