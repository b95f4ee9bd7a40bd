use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::memory::MemoryBudget;
use crate::retrieval::{Bm25Params, Retriever};

/// A full continual-learning run, usually read from a TOML file.
///
/// ```toml
/// schema = "schema.json"
/// out_dir = "runs/demo"
/// orderings = [["hotel", "restaurant", "flight"], ["flight", "hotel", "restaurant"]]
/// k = 1
/// seeds = [42]
///
/// [domains]
/// hotel = "hotel.jsonl"
/// restaurant = "restaurant.jsonl"
/// flight = "flight.jsonl"
///
/// [retriever]
/// train = "oracle"
/// dev = "oracle"
/// test = "bm25"
///
/// [memory]
/// m = 50
/// strategy = "dialogue"
/// seed = 42
///
/// [answerer]
/// kind = "external"
/// command = ["python3", "answer.py", "{input}", "{output}"]
/// timeout_secs = 600
/// ```
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    /// Domain -> corpus file.
    pub domains: BTreeMap<String, PathBuf>,
    pub orderings: Vec<Vec<String>>,
    pub out_dir: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
    /// k for dev-split instances; defaults to `k`.
    #[serde(default)]
    pub dev_k: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub retriever: RetrieverConfig,
    #[serde(default)]
    pub memory: MemoryBudget,
    #[serde(default)]
    pub answerer: AnswererConfig,
    #[serde(default = "default_eval_split")]
    pub eval_split: Split,
    /// Emit dev-split instances for the current service at each stage.
    #[serde(default = "yes")]
    pub emit_dev: bool,
    /// Emit instances for every turn of each stage's training manifest.
    #[serde(default)]
    pub emit_train_instances: bool,
    /// Evaluate every service at every stage instead of only `a[t][t+1]` above the diagonal.
    #[serde(default)]
    pub full_upper_triangle: bool,
    #[serde(default)]
    pub bm25: Bm25ParamsConfig,
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default = "yes")]
    pub exclude_same_dialogue: bool,
}

fn default_k() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![42]
}

fn default_eval_split() -> Split {
    Split::Test
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25ParamsConfig {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25ParamsConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Bm25ParamsConfig { k1: p.k1, b: p.b }
    }
}

impl From<Bm25ParamsConfig> for Bm25Params {
    fn from(c: Bm25ParamsConfig) -> Self {
        Bm25Params { k1: c.k1, b: c.b }
    }
}

/// Retriever names per split; random retrievers take the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieverConfig {
    pub train: String,
    pub dev: String,
    pub test: String,
    /// Embedding file, required when any split uses the embedding retriever.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        RetrieverConfig {
            train: "oracle".into(),
            dev: "oracle".into(),
            test: "bm25".into(),
            embeddings: None,
        }
    }
}

impl RetrieverConfig {
    pub fn for_split(&self, split: Split, seed: u64) -> Result<Retriever> {
        let name = match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        };
        Retriever::from_name(name, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnswererConfig {
    /// Echoes gold answers.
    #[default]
    Gold,
    /// Always answers `none`.
    None,
    /// Copies the first in-context example's answer.
    CopyExample,
    /// Runs a command; `{input}` and `{output}` in its arguments are replaced
    /// by the instance file and the answer file it must write.
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    /// Reads precomputed answer files from `dir`, mirroring the instance file layout.
    Files { dir: PathBuf },
}

fn default_timeout() -> u64 {
    3600
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.schema);
        fix(&mut self.out_dir);
        self.domains.values_mut().for_each(fix);
        if let Some(e) = &mut self.retriever.embeddings {
            fix(e);
        }
        if let AnswererConfig::Files { dir } = &mut self.answerer {
            fix(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.orderings.is_empty() {
            return err("orderings must not be empty".into());
        }
        if self.seeds.is_empty() {
            return err("seeds must not be empty".into());
        }
        for (i, order) in self.orderings.iter().enumerate() {
            if order.is_empty() {
                return err(format!("ordering {i} is empty"));
            }
            let mut seen = std::collections::BTreeSet::new();
            for d in order {
                if !self.domains.contains_key(d) {
                    return err(format!("ordering {i} names domain {d:?} without a corpus"));
                }
                if !seen.insert(d) {
                    return err(format!("ordering {i} repeats domain {d:?}"));
                }
            }
        }
        for split in [Split::Train, Split::Dev, Split::Test] {
            let r = self.retriever.for_split(split, 0).map_err(|e| Error::Config(e.to_string()))?;
            if r == Retriever::Embedding && self.retriever.embeddings.is_none() {
                return err(format!("{split} retriever is embedding but no embeddings file is set"));
            }
        }
        if let AnswererConfig::External { command, .. } = &self.answerer {
            if command.is_empty() {
                return err("external answerer command is empty".into());
            }
        }
        if self.answerer == AnswererConfig::CopyExample && self.k == 0 {
            return err("copy_example answerer needs k >= 1".into());
        }
        if self.memory.turns_per_dialogue_estimate == 0 {
            return err("memory.turns_per_dialogue_estimate must be positive".into());
        }
        Ok(())
    }

    pub fn dev_k(&self) -> usize {
        self.dev_k.unwrap_or(self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema = "schema.json"
out_dir = "out"
orderings = [["a", "b"]]
[domains]
a = "a.jsonl"
b = "b.jsonl"
"#;

    #[test]
    fn defaults_and_path_resolution() {
        let c = RunConfig::from_toml(BASE, Path::new("/data")).unwrap();
        assert_eq!(c.schema, PathBuf::from("/data/schema.json"));
        assert_eq!(c.domains["a"], PathBuf::from("/data/a.jsonl"));
        assert_eq!(c.k, 1);
        assert_eq!(c.dev_k(), 1);
        assert_eq!(c.seeds, [42]);
        assert_eq!(c.answerer, AnswererConfig::Gold);
        assert_eq!(c.eval_split, Split::Test);
        assert!(c.emit_dev);
    }

    #[test]
    fn answerer_variants_parse() {
        let text = format!("{BASE}\n[answerer]\nkind = \"external\"\ncommand = [\"sh\", \"-c\", \"cp {{input}} {{output}}\"]\n");
        let c = RunConfig::from_toml(&text, Path::new(".")).unwrap();
        assert!(matches!(c.answerer, AnswererConfig::External { timeout_secs: 3600, .. }));
    }

    #[test]
    fn rejects_bad_configs() {
        let unknown_domain = BASE.replace("[[\"a\", \"b\"]]", "[[\"a\", \"c\"]]");
        assert!(matches!(RunConfig::from_toml(&unknown_domain, Path::new(".")), Err(Error::Config(_))));
        let empty = BASE.replace("[[\"a\", \"b\"]]", "[]");
        assert!(RunConfig::from_toml(&empty, Path::new(".")).is_err());
        let bad_retriever = format!("{BASE}\n[retriever]\ntrain = \"x\"\ndev = \"oracle\"\ntest = \"bm25\"\n");
        assert!(RunConfig::from_toml(&bad_retriever, Path::new(".")).is_err());
        let no_emb = format!("{BASE}\n[retriever]\ntrain = \"oracle\"\ndev = \"oracle\"\ntest = \"embedding\"\n");
        assert!(RunConfig::from_toml(&no_emb, Path::new(".")).is_err());
        let typo = format!("{BASE}\nkk = 3\n");
        assert!(RunConfig::from_toml(&typo, Path::new(".")).is_err());
    }
}
