//! Continual-learning protocol driver.
//!
//! For each (ordering, seed) run and each stage `t`:
//!
//! 1. write the stage training manifest: the current service's train split
//!    plus replay memory from every earlier service;
//! 2. grow the example database with the current service's train split;
//! 3. emit evaluation instances for services `1..=t` and `t+1`, hand them to
//!    the answerer, fold answers into states and record JGA in `a[t][i]`.
//!
//! Layout under `out_dir`:
//!
//! ```text
//! run-01-seed42/stage01/manifest.jsonl
//! run-01-seed42/stage01/test_hotel.instances.jsonl
//! run-01-seed42/stage01/test_hotel.answers.jsonl
//! run-01-seed42/stage01/test_hotel.predictions.jsonl
//! run-01-seed42/stage01/dev_hotel.instances.jsonl
//! run-01-seed42/matrix.json
//! report.json
//! ```

pub mod answerer;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus_with_schema, load_schema, Corpus, SlotSchema, Split, TurnRecord};
use crate::error::{Error, Result};
use crate::evaluation::{jga, AccuracyMatrix, MetricTriple, OrderReport, Report, StateRecord};
use crate::jsonl;
use crate::memory::MemoryBudget;
use crate::promptgen::{aggregate_answers, build_instances, PromptOptions, QAInstance};
use crate::retrieval::{load_embeddings, EmbeddingTable, ExampleDatabase, ExclusionPolicy, Retriever};

pub use answerer::{answerer_copy_example, collect_answers, validate_answers};
pub use config::{AnswererConfig, RetrieverConfig, RunConfig};

/// Corpora, schema and embeddings a run reads.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub schema: Vec<SlotSchema>,
    pub corpora: BTreeMap<String, Corpus>,
    pub embeddings: Option<EmbeddingTable>,
}

impl RunInputs {
    pub fn load(config: &RunConfig) -> Result<Self> {
        if !config.schema.exists() {
            return Err(Error::Config(format!("schema not found at {}", config.schema.display())));
        }
        let schema = load_schema(&config.schema)?;
        let mut corpora = BTreeMap::new();
        for (domain, path) in &config.domains {
            if !path.exists() {
                return Err(Error::Config(format!("corpus for {domain} not found at {}", path.display())));
            }
            let c = load_corpus_with_schema(path, &schema)?;
            if &c.domain != domain {
                return Err(Error::Config(format!(
                    "{} holds domain {:?}, config expects {domain:?}",
                    path.display(),
                    c.domain
                )));
            }
            corpora.insert(domain.clone(), c);
        }
        let embeddings = config.retriever.embeddings.as_ref().map(load_embeddings).transpose()?;
        Ok(RunInputs {
            schema,
            corpora,
            embeddings,
        })
    }

    pub fn from_corpora(corpora: impl IntoIterator<Item = Corpus>) -> Self {
        let corpora: BTreeMap<String, Corpus> = corpora.into_iter().map(|c| (c.domain.clone(), c)).collect();
        RunInputs {
            schema: corpora.values().flat_map(|c| c.schema.iter().cloned()).collect(),
            corpora,
            embeddings: None,
        }
    }

    fn corpus(&self, domain: &str) -> Result<&Corpus> {
        self.corpora
            .get(domain)
            .ok_or_else(|| Error::Config(format!("no corpus loaded for {domain}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestSource {
    Current,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub origin: String,
    pub source: ManifestSource,
    pub dialogue_id: String,
    pub turn_index: usize,
}

/// Per-stage record of what was emitted and measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageArtifacts {
    pub run: String,
    pub stage: usize,
    pub manifest: PathBuf,
    pub instance_files: Vec<PathBuf>,
    pub answer_files: Vec<PathBuf>,
    /// Evaluated domain -> JGA.
    pub jga: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub stages: Vec<StageArtifacts>,
}

/// Seed for one service's replay memory, independent of ordering and stage.
pub fn memory_seed(seed: u64, domain: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in domain.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed
}

/// Replay turns of one previous service under the budget.
pub fn memory_turns<'a>(corpus: &'a Corpus, budget: &MemoryBudget) -> Vec<&'a TurnRecord> {
    budget.sample_with_seed(corpus.dialogues(Split::Train), memory_seed(budget.seed, &corpus.domain))
}

/// Training manifest of stage `t` (0-based) of `order`.
pub fn stage_manifest(inputs: &RunInputs, order: &[String], t: usize, budget: &MemoryBudget) -> Result<Vec<ManifestEntry>> {
    let current = inputs.corpus(&order[t])?;
    let mut out: Vec<ManifestEntry> = current
        .turns(Split::Train)
        .map(|turn| ManifestEntry {
            origin: current.domain.clone(),
            source: ManifestSource::Current,
            dialogue_id: turn.dialogue_id.clone(),
            turn_index: turn.turn_index,
        })
        .collect();
    if budget.m > 0 {
        for d in &order[..t] {
            let c = inputs.corpus(d)?;
            out.extend(memory_turns(c, budget).into_iter().map(|turn| ManifestEntry {
                origin: c.domain.clone(),
                source: ManifestSource::Memory,
                dialogue_id: turn.dialogue_id.clone(),
                turn_index: turn.turn_index,
            }));
        }
    }
    Ok(out)
}

/// Writes the stage manifest to `path` and returns its entries.
pub fn emit_stage_manifest(
    config: &RunConfig,
    inputs: &RunInputs,
    order: &[String],
    t: usize,
    path: &Path,
) -> Result<Vec<ManifestEntry>> {
    let entries = stage_manifest(inputs, order, t, &config.memory)?;
    jsonl::write(path, &entries)?;
    Ok(entries)
}

fn instances_for<'a>(
    turns: impl IntoIterator<Item = &'a TurnRecord>,
    schema: &[SlotSchema],
    retriever: &Retriever,
    db: &ExampleDatabase,
    k: usize,
    opts: PromptOptions,
) -> Result<Vec<QAInstance>> {
    let mut out = Vec::new();
    for t in turns {
        out.extend(build_instances(t, schema, retriever, db, k, opts)?);
    }
    Ok(out)
}

pub fn run_cl(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let inputs = RunInputs::load(config)?;
    run_with_inputs(config, &inputs)
}

pub fn run_with_inputs(config: &RunConfig, inputs: &RunInputs) -> Result<RunOutput> {
    config.validate()?;
    let opts = PromptOptions {
        lowercase: config.lowercase,
    };
    let mut per_order = Vec::new();
    let mut stages = Vec::new();

    for (o, order) in config.orderings.iter().enumerate() {
        for &seed in &config.seeds {
            let run_name = format!("run-{:02}-seed{seed}", o + 1);
            let run_dir = config.out_dir.join(&run_name);
            let (matrix, run_stages) = run_one(config, inputs, order, seed, &run_name, &run_dir, opts)?;
            let metrics = MetricTriple::compute(&matrix)?;
            write_json(&run_dir.join("matrix.json"), &matrix)?;
            per_order.push(OrderReport {
                order: order.clone(),
                seed,
                metrics,
                matrix,
            });
            stages.extend(run_stages);
        }
    }
    let report = Report::aggregate(per_order)?;
    write_json(&config.out_dir.join("report.json"), &report)?;
    Ok(RunOutput { report, stages })
}

fn run_one(
    config: &RunConfig,
    inputs: &RunInputs,
    order: &[String],
    seed: u64,
    run_name: &str,
    run_dir: &Path,
    opts: PromptOptions,
) -> Result<(AccuracyMatrix, Vec<StageArtifacts>)> {
    let n = order.len();
    let mut matrix = AccuracyMatrix::new(order.to_vec());
    let mut db = ExampleDatabase::new(config.bm25.into());
    db.exclusion = ExclusionPolicy {
        same_dialogue: config.exclude_same_dialogue,
    };
    if let Some(e) = &inputs.embeddings {
        db.set_embeddings(e.clone());
    }
    let train_r = config.retriever.for_split(Split::Train, seed)?;
    let dev_r = config.retriever.for_split(Split::Dev, seed)?;
    let eval_r = config.retriever.for_split(config.eval_split, seed)?;
    let eval_k = if config.eval_split == Split::Dev { config.dev_k() } else { config.k };
    let mut stages = Vec::with_capacity(n);

    for t in 0..n {
        let stage_rel = PathBuf::from(format!("stage{:02}", t + 1));
        let stage_dir = run_dir.join(&stage_rel);
        let current = inputs.corpus(&order[t])?;

        let manifest_path = stage_dir.join("manifest.jsonl");
        let manifest = emit_stage_manifest(config, inputs, order, t, &manifest_path)?;
        db.extend(current.turns(Split::Train));

        let mut instance_files = Vec::new();
        let mut answer_files = Vec::new();

        if config.emit_train_instances {
            let lookup: BTreeMap<(&str, usize), &TurnRecord> = manifest
                .iter()
                .map(|m| {
                    let c = inputs.corpus(&m.origin)?;
                    let turn = c
                        .turns(Split::Train)
                        .find(|x| x.dialogue_id == m.dialogue_id && x.turn_index == m.turn_index)
                        .expect("manifest entries come from the corpus");
                    Ok(((m.dialogue_id.as_str(), m.turn_index), turn))
                })
                .collect::<Result<_>>()?;
            let mut insts = Vec::new();
            for m in &manifest {
                let turn = lookup[&(m.dialogue_id.as_str(), m.turn_index)];
                let schema = &inputs.corpus(&m.origin)?.schema;
                insts.extend(build_instances(turn, schema, &train_r, &db, config.k, opts)?);
            }
            let path = stage_dir.join("train.instances.jsonl");
            jsonl::write(&path, &insts)?;
            instance_files.push(path);
        }

        if config.emit_dev && !current.dialogues(Split::Dev).is_empty() {
            let insts = instances_for(current.turns(Split::Dev), &current.schema, &dev_r, &db, config.dev_k(), opts)?;
            let path = stage_dir.join(format!("dev_{}.instances.jsonl", current.domain));
            jsonl::write(&path, &insts)?;
            instance_files.push(path);
        }

        let eval_domains: Vec<usize> = if config.full_upper_triangle {
            (0..n).collect()
        } else {
            (0..=(t + 1).min(n - 1)).collect()
        };
        let mut stage_jga = BTreeMap::new();
        for i in eval_domains {
            let corpus = inputs.corpus(&order[i])?;
            let turns: Vec<&TurnRecord> = corpus.turns(config.eval_split).collect();
            if turns.is_empty() {
                return Err(Error::Config(format!(
                    "domain {} has no {} turns to evaluate",
                    corpus.domain, config.eval_split
                )));
            }
            let insts = instances_for(turns.iter().copied(), &corpus.schema, &eval_r, &db, eval_k, opts)?;
            let rel = stage_rel.join(format!("{}_{}.instances.jsonl", config.eval_split, corpus.domain));
            let inst_path = run_dir.join(&rel);
            jsonl::write(&inst_path, &insts)?;
            let ans_path = run_dir.join(answerer::answer_file_name(&rel));
            let answers = collect_answers(
                &config.answerer,
                &insts,
                &inst_path,
                &ans_path,
                &Path::new(run_name).join(&rel),
            )?;
            if !matches!(config.answerer, AnswererConfig::External { .. }) {
                jsonl::write(&ans_path, &answers)?;
            }

            let per_turn = corpus.num_slots();
            let mut preds = Vec::with_capacity(turns.len());
            let mut records = Vec::with_capacity(turns.len());
            for (turn, chunk) in turns.iter().zip(answers.chunks(per_turn)) {
                let state = aggregate_answers(chunk, &corpus.schema)?;
                records.push(StateRecord {
                    dialogue_id: turn.dialogue_id.clone(),
                    turn_index: turn.turn_index,
                    state: state.clone(),
                });
                preds.push(state);
            }
            let golds: Vec<_> = turns.iter().map(|t| t.state.clone()).collect();
            let score = jga(&preds, &golds)?;
            matrix.set(t, i, score);
            stage_jga.insert(corpus.domain.clone(), score);
            jsonl::write(
                run_dir.join(rel.with_file_name(format!("{}_{}.predictions.jsonl", config.eval_split, corpus.domain))),
                &records,
            )?;
            instance_files.push(inst_path);
            answer_files.push(ans_path);
        }

        stages.push(StageArtifacts {
            run: run_name.to_string(),
            stage: t + 1,
            manifest: manifest_path,
            instance_files,
            answer_files,
            jga: stage_jga,
        });
    }
    Ok((matrix, stages))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
