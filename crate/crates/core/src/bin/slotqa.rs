use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slotqa::corpus::{load_corpus_with_schema, load_schema, Corpus, Split, TurnId, TurnRecord};
use slotqa::evaluation::{jga_from_records, AccuracyMatrix, MetricTriple, StateRecord};
use slotqa::harness::{run_cl, RunConfig};
use slotqa::memory::{sample_entries, MemoryBudget, SamplingStrategy};
use slotqa::promptgen::{build_instances, PromptOptions};
use slotqa::retrieval::{
    export_contrastive_pairs, load_embeddings, Bm25Params, ExampleDatabase, ExclusionPolicy, PairExportOptions,
    PairingMode, Retriever,
};
use slotqa::similarity::{oracle_rank, turn_delta};
use slotqa::text::SimpleTokenizer;
use slotqa::{jsonl, Error, Result};

#[derive(Parser)]
#[command(name = "slotqa", version, about = "Example-guided slot QA toolkit for continual dialogue state tracking")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (one dialogue per line); repeat for several domains.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    #[arg(long)]
    schema: PathBuf,
}

impl CorpusArgs {
    fn load(&self) -> Result<Vec<Corpus>> {
        let schema = load_schema(&self.schema)?;
        self.corpora.iter().map(|p| load_corpus_with_schema(p, &schema)).collect()
    }
}

#[derive(Args)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.5)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and validate corpus files, printing per-split counts.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Only validate; print nothing on success.
        #[arg(long)]
        validate: bool,
    },
    /// Print one delta record per turn.
    Delta {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Rank candidates of a split against a target turn by state-change similarity.
    OracleRank {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Target turn id, `dialogue_id:turn_index`.
        #[arg(long)]
        target: TurnId,
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Keep candidates from the target's own dialogue.
        #[arg(long)]
        include_same_dialogue: bool,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Build the BM25 index over train-split query texts and write it as JSON.
    BuildIndex {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Retrieve in-context examples for a target turn from the train splits.
    Retrieve {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        target: TurnId,
        #[arg(long, default_value = "bm25")]
        retriever: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Mine contrastive (anchor, positive, negative) triplets from the first service's train split.
    ExportPairs {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        domain_first: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        top_n: usize,
        #[arg(long, default_value_t = 10)]
        hard: usize,
        /// Pair the i-th positive with the i-th negative instead of all combinations.
        #[arg(long)]
        rank_aligned: bool,
        #[arg(long)]
        exclude_same_dialogue: bool,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Emit QA instances for every turn of a split, using train splits as the example database.
    GenPrompts {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = "bm25")]
        retriever: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep utterance casing.
        #[arg(long)]
        keep_case: bool,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Draw a replay memory from a train split; output is a corpus-format file.
    SampleMemory {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "dialogue")]
        strategy: SamplingStrategy,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        turns_per_dialogue_estimate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continual-learning metrics from a matrix file, or JGA from prediction and gold state files.
    Eval {
        #[arg(long, conflicts_with_all = ["preds", "gold"])]
        matrix: Option<PathBuf>,
        #[arg(long, requires = "gold")]
        preds: Option<PathBuf>,
        #[arg(long, requires = "preds")]
        gold: Option<PathBuf>,
        /// Print full-precision JSON instead of percentages.
        #[arg(long)]
        json: bool,
    },
    /// Run the full continual-learning protocol from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert an SGD-style release into schema.json plus one corpus file per service.
    ConvertSgd {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only these services (repeatable).
        #[arg(long = "service")]
        services: Vec<String>,
    },
}

fn print_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(jsonl::to_string(items).as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn find_turn<'a>(corpora: &'a [Corpus], id: &TurnId) -> Result<&'a TurnRecord> {
    corpora
        .iter()
        .flat_map(|c| [Split::Train, Split::Dev, Split::Test].into_iter().flat_map(move |s| c.turns(s)))
        .find(|t| t.dialogue_id == id.dialogue_id && t.turn_index == id.turn_index)
        .ok_or_else(|| Error::Corpus(format!("turn {id} not found")))
}

fn train_database(corpora: &[Corpus], params: Bm25Params, embeddings: Option<&PathBuf>) -> Result<ExampleDatabase> {
    let mut db = ExampleDatabase::new(params);
    db.extend(corpora.iter().flat_map(|c| c.turns(Split::Train)));
    if let Some(p) = embeddings {
        db.set_embeddings(load_embeddings(p)?);
    }
    Ok(db)
}

#[derive(Serialize)]
struct DeltaLine {
    dialogue_id: String,
    turn_index: usize,
    delta: Vec<slotqa::delta::DeltaEntry>,
}

#[derive(Serialize)]
struct RetrievedLine {
    target: TurnId,
    rank: usize,
    candidate: TurnId,
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest { corpus, validate } => {
            let corpora = corpus.load()?;
            if !validate {
                for c in &corpora {
                    for split in [Split::Train, Split::Dev, Split::Test] {
                        println!(
                            "{}\t{split}\t{} dialogues\t{} turns",
                            c.domain,
                            c.dialogues(split).len(),
                            c.turns(split).count()
                        );
                    }
                }
            }
        }
        Cmd::Delta { corpus } => {
            let corpora = corpus.load()?;
            let lines = corpora
                .iter()
                .flat_map(|c| [Split::Train, Split::Dev, Split::Test].into_iter().flat_map(move |s| c.turns(s)))
                .map(|t| DeltaLine {
                    dialogue_id: t.dialogue_id.clone(),
                    turn_index: t.turn_index,
                    delta: turn_delta(t).entries().collect(),
                });
            print_jsonl(lines)?;
        }
        Cmd::OracleRank {
            corpus,
            target,
            split,
            top,
            include_same_dialogue,
            bm25,
        } => {
            let corpora = corpus.load()?;
            let target = find_turn(&corpora, &target)?;
            let policy = ExclusionPolicy {
                same_dialogue: !include_same_dialogue,
            };
            let candidates: Vec<&TurnRecord> = corpora
                .iter()
                .flat_map(|c| c.turns(split))
                .filter(|c| !policy.excludes(&target.id(), &c.id()))
                .collect();
            let mut ranked = oracle_rank(target, &candidates, &SimpleTokenizer, bm25.params());
            ranked.truncate(top);
            print_jsonl(ranked)?;
        }
        Cmd::BuildIndex { corpus, out, bm25 } => {
            let corpora = corpus.load()?;
            let index = train_database(&corpora, bm25.params(), None)?.build_bm25_index()?;
            let text = serde_json::to_string(&index).expect("index serializes");
            std::fs::write(&out, text + "\n").map_err(|e| Error::io(&out, e))?;
            eprintln!("indexed {} documents", index.num_docs());
        }
        Cmd::Retrieve {
            corpus,
            target,
            retriever,
            k,
            seed,
            embeddings,
            bm25,
        } => {
            let corpora = corpus.load()?;
            let retriever = Retriever::from_name(&retriever, seed)?;
            let db = train_database(&corpora, bm25.params(), embeddings.as_ref())?;
            let t = find_turn(&corpora, &target)?;
            let got = db.retrieve(t, &retriever, k)?;
            print_jsonl(got.iter().enumerate().map(|(i, c)| RetrievedLine {
                target: target.clone(),
                rank: i + 1,
                candidate: c.id(),
            }))?;
        }
        Cmd::ExportPairs {
            corpus,
            domain_first,
            out,
            top_n,
            hard,
            rank_aligned,
            exclude_same_dialogue,
            bm25,
        } => {
            let corpora = corpus.load()?;
            let first = corpora
                .iter()
                .find(|c| c.domain == domain_first)
                .ok_or_else(|| Error::Config(format!("no corpus for domain {domain_first}")))?;
            let turns: Vec<&TurnRecord> = first.turns(Split::Train).collect();
            let opts = PairExportOptions {
                top_n,
                hard,
                mode: if rank_aligned { PairingMode::RankAligned } else { PairingMode::CrossProduct },
                bm25: bm25.params(),
                exclusion: ExclusionPolicy {
                    same_dialogue: exclude_same_dialogue,
                },
            };
            let n = export_contrastive_pairs(&turns, &SimpleTokenizer, &opts, &out)?;
            eprintln!("wrote {n} pairs to {}", out.display());
        }
        Cmd::GenPrompts {
            corpus,
            split,
            retriever,
            k,
            seed,
            embeddings,
            out,
            keep_case,
            bm25,
        } => {
            let corpora = corpus.load()?;
            let retriever = Retriever::from_name(&retriever, seed)?;
            let db = train_database(&corpora, bm25.params(), embeddings.as_ref())?;
            let opts = PromptOptions { lowercase: !keep_case };
            let mut instances = Vec::new();
            for c in &corpora {
                for t in c.turns(split) {
                    instances.extend(build_instances(t, &c.schema, &retriever, &db, k, opts)?);
                }
            }
            jsonl::write(&out, &instances)?;
            eprintln!("wrote {} instances to {}", instances.len(), out.display());
        }
        Cmd::SampleMemory {
            corpus,
            strategy,
            m,
            seed,
            turns_per_dialogue_estimate,
            out,
        } => {
            let corpora = corpus.load()?;
            let budget = MemoryBudget {
                m,
                strategy,
                seed,
                turns_per_dialogue_estimate,
            };
            let entries: Vec<_> = corpora.iter().flat_map(|c| sample_entries(c, &budget)).collect();
            jsonl::write(&out, &entries)?;
        }
        Cmd::Eval {
            matrix,
            preds,
            gold,
            json,
        } => match (matrix, preds, gold) {
            (Some(path), _, _) => {
                let m = AccuracyMatrix::load(&path)?;
                let metrics = MetricTriple::compute(&m)?;
                if json {
                    println!("{}", serde_json::to_string(&metrics).expect("metrics serialize"));
                } else {
                    println!("{}", metrics.display_percent());
                }
            }
            (None, Some(p), Some(g)) => {
                let preds: Vec<StateRecord> = jsonl::read(&p)?;
                let golds: Vec<StateRecord> = jsonl::read(&g)?;
                let score = jga_from_records(&preds, &golds)?;
                if json {
                    println!("{}", serde_json::json!({ "jga": score }));
                } else {
                    println!("JGA {:.1}", 100.0 * score);
                }
            }
            _ => return Err(Error::Config("eval needs --matrix or both --preds and --gold".into())),
        },
        Cmd::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_cl(&cfg)?;
            print!("{}", out.report.display_percent());
            println!("report: {}", cfg.out_dir.join("report.json").display());
        }
        Cmd::ConvertSgd { input, out, services } => {
            let conv = slotqa::convert::convert_sgd(&input, &services)?;
            conv.corpora()?;
            for p in conv.write_to(&out)? {
                println!("{}", p.display());
            }
            eprintln!("skipped {} dialogues", conv.skipped);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
