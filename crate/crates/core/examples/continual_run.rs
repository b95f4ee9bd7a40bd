//! Full continual-learning protocol on synthetic data with the built-in
//! answerers, then the same run driven from a TOML config file as
//! `slotqa run --config` would do.
//!
//! cargo run --example continual_run -- [out_dir]

use slotqa::harness::{run_cl, run_with_inputs, AnswererConfig, RetrieverConfig, RunConfig, RunInputs};
use slotqa::memory::{MemoryBudget, SamplingStrategy};
use slotqa::synthetic::{generate, twin_fixture, SyntheticConfig};

fn main() -> slotqa::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("slotqa-run"));

    let synth = SyntheticConfig::default();
    let data = twin_fixture(&synth)?;
    let inputs = RunInputs::from_corpora(data.corpora.clone());
    let order: Vec<String> = synth.domains.clone();
    let mut cfg = RunConfig::from_toml(
        &format!(
            "schema = \"unused\"\nout_dir = \"runs\"\norderings = [{:?}]\n[domains]\n{}",
            order,
            order.iter().map(|d| format!("{d} = \"unused\"\n")).collect::<String>()
        ),
        &out,
    )?;
    cfg.orderings.push(order.iter().rev().cloned().collect());
    cfg.memory = MemoryBudget {
        m: 20,
        strategy: SamplingStrategy::Dialogue,
        seed: 1,
        ..MemoryBudget::default()
    };

    let runs = [
        ("gold", AnswererConfig::Gold, "oracle"),
        ("none", AnswererConfig::None, "oracle"),
        ("copy/oracle", AnswererConfig::CopyExample, "oracle"),
        ("copy/bm25", AnswererConfig::CopyExample, "bm25"),
        ("copy/random", AnswererConfig::CopyExample, "random"),
    ];
    for (label, answerer, retriever) in runs {
        let mut c = cfg.clone();
        c.answerer = answerer;
        c.retriever = RetrieverConfig {
            test: retriever.into(),
            ..RetrieverConfig::default()
        };
        c.out_dir = out.join(label.replace('/', "-"));
        let report = run_with_inputs(&c, &inputs)?.report;
        println!("== {label} (twin fixture)\n{}", report.display_percent());
    }

    // The same protocol from files on disk.
    let data_dir = out.join("data");
    generate(&synth)?.write_to(&data_dir)?;
    let toml = r#"
schema = "data/schema.json"
out_dir = "runs/from-config"
orderings = [["hotel", "restaurant", "flight"], ["flight", "hotel", "restaurant"]]
k = 1
seeds = [1, 2]

[domains]
hotel = "data/hotel.jsonl"
restaurant = "data/restaurant.jsonl"
flight = "data/flight.jsonl"

[retriever]
train = "oracle"
dev = "oracle"
test = "bm25"

[memory]
m = 50
strategy = "dialogue"
seed = 42

[answerer]
kind = "copy_example"
"#;
    let path = out.join("run.toml");
    std::fs::write(&path, toml).map_err(|e| slotqa::Error::io(&path, e))?;
    let result = run_cl(&RunConfig::load(&path)?)?;
    println!("== copy/bm25 from {}\n{}", path.display(), result.report.display_percent());
    let last = result.stages.last().expect("stages");
    println!("last stage of {}: {:?}", last.run, last.jga);
    Ok(())
}
