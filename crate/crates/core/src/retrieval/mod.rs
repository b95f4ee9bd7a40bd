//! Example database and interchangeable example retrievers.
//!
//! Every retriever draws from the same admissible pool for a target: entries
//! of the target's own domain when the database holds any, otherwise every
//! entry; minus whatever the [`ExclusionPolicy`] rules out. Orderings are
//! deterministic and ties break by candidate id ascending.

pub mod bm25;
pub mod embedding;
pub mod pairs;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TurnId, TurnRecord};
use crate::error::{Error, Result};
use crate::similarity::{rank_prepared, PreparedTurn};
use crate::text::{SimpleTokenizer, Tokenizer};

pub use bm25::{Bm25Index, Bm25Params};
pub use embedding::{load_embeddings, EmbeddingRecord, EmbeddingTable};
pub use pairs::{export_contrastive_pairs, mine_contrastive_pairs, ContrastivePair, PairExportOptions, PairingMode};

/// `u_{t-1} ⊕ u_t`: the last system utterance (if any) and the last user
/// utterance joined by a space. Never includes dialogue state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryText(String);

impl QueryText {
    pub fn from_turn(turn: &TurnRecord) -> Self {
        let user = &turn.last_user().text;
        QueryText(match turn.last_system() {
            Some(sys) => format!("{} {}", sys.text, user),
            None => user.clone(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionPolicy {
    /// Exclude every turn of the target's dialogue, not just the target.
    pub same_dialogue: bool,
}

impl Default for ExclusionPolicy {
    fn default() -> Self {
        ExclusionPolicy { same_dialogue: true }
    }
}

impl ExclusionPolicy {
    pub fn excludes(&self, target: &TurnId, candidate: &TurnId) -> bool {
        candidate == target || (self.same_dialogue && candidate.dialogue_id == target.dialogue_id)
    }
}

/// Default policy: true (excluded) iff the candidate shares the target's dialogue.
pub fn exclusion_policy(target: &TurnRecord, candidate: &TurnRecord) -> bool {
    ExclusionPolicy::default().excludes(&target.id(), &candidate.id())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Retriever {
    Random { seed: u64 },
    Bm25,
    Embedding,
    Oracle,
}

impl Retriever {
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        match name {
            "random" => Ok(Retriever::Random { seed }),
            "bm25" => Ok(Retriever::Bm25),
            "embedding" => Ok(Retriever::Embedding),
            "oracle" => Ok(Retriever::Oracle),
            other => Err(Error::UnknownRetriever(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Retriever::Random { .. } => "random",
            Retriever::Bm25 => "bm25",
            Retriever::Embedding => "embedding",
            Retriever::Oracle => "oracle",
        }
    }
}

impl FromStr for Retriever {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Retriever::from_name(s, 0)
    }
}

struct Entry {
    turn: TurnRecord,
    prepared: PreparedTurn,
}

/// Training turns available as in-context examples. Grows as services are learned.
pub struct ExampleDatabase {
    entries: Vec<Entry>,
    by_domain: BTreeMap<String, Vec<usize>>,
    domain_bm25: BTreeMap<String, Bm25Index>,
    global_bm25: Option<Bm25Index>,
    params: Bm25Params,
    tokenizer: Arc<dyn Tokenizer + Send + Sync>,
    embeddings: Option<EmbeddingTable>,
    pub exclusion: ExclusionPolicy,
}

impl Default for ExampleDatabase {
    fn default() -> Self {
        Self::new(Bm25Params::default())
    }
}

impl fmt::Debug for ExampleDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleDatabase")
            .field("entries", &self.entries.len())
            .field("domains", &self.by_domain.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl ExampleDatabase {
    pub fn new(params: Bm25Params) -> Self {
        Self::with_tokenizer(params, Arc::new(SimpleTokenizer))
    }

    pub fn with_tokenizer(params: Bm25Params, tokenizer: Arc<dyn Tokenizer + Send + Sync>) -> Self {
        ExampleDatabase {
            entries: Vec::new(),
            by_domain: BTreeMap::new(),
            domain_bm25: BTreeMap::new(),
            global_bm25: None,
            params,
            tokenizer,
            embeddings: None,
            exclusion: ExclusionPolicy::default(),
        }
    }

    pub fn from_turns<'a>(turns: impl IntoIterator<Item = &'a TurnRecord>) -> Self {
        let mut db = Self::default();
        db.extend(turns);
        db
    }

    /// Adds turns and rebuilds the BM25 indexes of the touched domains.
    pub fn extend<'a>(&mut self, turns: impl IntoIterator<Item = &'a TurnRecord>) {
        let mut touched = Vec::new();
        for t in turns {
            let i = self.entries.len();
            self.entries.push(Entry {
                prepared: PreparedTurn::new(t, self.tokenizer.as_ref()),
                turn: t.clone(),
            });
            self.by_domain.entry(t.domain.clone()).or_default().push(i);
            if !touched.contains(&t.domain) {
                touched.push(t.domain.clone());
            }
        }
        if touched.is_empty() {
            return;
        }
        for d in touched {
            let docs: Vec<&[String]> = self.by_domain[&d]
                .iter()
                .map(|&i| self.entries[i].prepared.tokens.as_slice())
                .collect();
            let idx = Bm25Index::build(&docs, self.params).expect("domain has entries");
            self.domain_bm25.insert(d, idx);
        }
        let docs: Vec<&[String]> = self.entries.iter().map(|e| e.prepared.tokens.as_slice()).collect();
        self.global_bm25 = Some(Bm25Index::build(&docs, self.params).expect("non-empty"));
    }

    pub fn set_embeddings(&mut self, table: EmbeddingTable) {
        self.embeddings = Some(table);
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn turns(&self) -> impl Iterator<Item = &TurnRecord> {
        self.entries.iter().map(|e| &e.turn)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.by_domain.keys().map(String::as_str)
    }

    pub fn bm25_params(&self) -> Bm25Params {
        self.params
    }

    /// BM25 index over every entry, in insertion order.
    pub fn build_bm25_index(&self) -> Result<Bm25Index> {
        self.global_bm25.clone().ok_or(Error::EmptyDatabase)
    }

    /// Indices of admissible candidates, plus the domain whose index covers them.
    fn pool(&self, target: &TurnRecord) -> (Vec<usize>, Option<&str>) {
        let tid = target.id();
        let admit = |i: &usize| !self.exclusion.excludes(&tid, &self.entries[*i].prepared.id);
        if let Some((d, idx)) = self.by_domain.get_key_value(&target.domain) {
            let same: Vec<usize> = idx.iter().copied().filter(admit).collect();
            if !same.is_empty() {
                return (same, Some(d.as_str()));
            }
        }
        ((0..self.entries.len()).filter(admit).collect(), None)
    }

    /// Top-k examples for `target`; fewer only when the pool is smaller than k.
    pub fn retrieve(&self, target: &TurnRecord, retriever: &Retriever, k: usize) -> Result<Vec<&TurnRecord>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let (pool, domain) = self.pool(target);
        if pool.is_empty() {
            return Ok(Vec::new());
        }
        let picked: Vec<usize> = match retriever {
            Retriever::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(turn_seed(*seed, &target.id()));
                index::sample(&mut rng, pool.len(), k.min(pool.len()))
                    .into_iter()
                    .map(|j| pool[j])
                    .collect()
            }
            Retriever::Bm25 => {
                let tokens = self.tokenizer.tokenize(QueryText::from_turn(target).as_str());
                let (index, members): (&Bm25Index, Vec<usize>) = match domain {
                    Some(d) => (&self.domain_bm25[d], self.by_domain[d].clone()),
                    None => (
                        self.global_bm25.as_ref().ok_or(Error::EmptyDatabase)?,
                        (0..self.entries.len()).collect(),
                    ),
                };
                let all = index.score_all(&tokens);
                let mut by_entry = vec![0.0; self.entries.len()];
                for (pos, &i) in members.iter().enumerate() {
                    by_entry[i] = all[pos];
                }
                self.top_k(&pool, k, |i| by_entry[i])
            }
            Retriever::Embedding => {
                let table = self
                    .embeddings
                    .as_ref()
                    .ok_or_else(|| Error::MissingEmbedding(target.id()))?;
                let q = table.get(&target.id())?;
                let mut scores = vec![0.0; self.entries.len()];
                for &i in &pool {
                    scores[i] = embedding::dot(q, table.get(&self.entries[i].prepared.id)?);
                }
                self.top_k(&pool, k, |i| scores[i])
            }
            Retriever::Oracle => {
                let target_prepared = PreparedTurn::new(target, self.tokenizer.as_ref());
                let cands: Vec<&PreparedTurn> = pool.iter().map(|&i| &self.entries[i].prepared).collect();
                let ranked = rank_prepared(&target_prepared, &cands, self.params);
                let pos: BTreeMap<&TurnId, usize> =
                    pool.iter().map(|&i| (&self.entries[i].prepared.id, i)).collect();
                ranked.iter().take(k).map(|s| pos[&s.candidate_id]).collect()
            }
        };
        Ok(picked.into_iter().map(|i| &self.entries[i].turn).collect())
    }

    fn top_k(&self, pool: &[usize], k: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
        let mut order = pool.to_vec();
        order.sort_by(|&a, &b| {
            score(b)
                .total_cmp(&score(a))
                .then_with(|| self.entries[a].prepared.id.cmp(&self.entries[b].prepared.id))
        });
        order.truncate(k);
        order
    }
}

/// Free-function form of [`ExampleDatabase::retrieve`].
pub fn retrieve<'a>(
    target: &TurnRecord,
    db: &'a ExampleDatabase,
    retriever: &Retriever,
    k: usize,
) -> Result<Vec<&'a TurnRecord>> {
    db.retrieve(target, retriever, k)
}

/// Mixes a run seed with a stable FNV-1a hash of the turn id.
pub(crate) fn turn_seed(seed: u64, id: &TurnId) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.dialogue_id.bytes().chain((id.turn_index as u64).to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueState, SlotKey, Utterance};

    fn turn(dlg: &str, idx: usize, user: &str, cur: &[(&str, &str)]) -> TurnRecord {
        let mut history = vec![Utterance::user("hello there")];
        for i in 1..idx {
            history.push(Utterance::system(format!("reply {i}")));
            history.push(Utterance::user(if i + 1 == idx { user } else { "more" }));
        }
        if idx == 1 {
            history[0] = Utterance::user(user);
        }
        TurnRecord {
            dialogue_id: dlg.into(),
            turn_index: idx,
            domain: "hotel".into(),
            history,
            state: cur
                .iter()
                .map(|(k, v)| (SlotKey::new("hotel", *k), v.to_string()))
                .collect(),
            prev_state: DialogueState::new(),
        }
    }

    fn all() -> [Retriever; 4] {
        [Retriever::Random { seed: 7 }, Retriever::Bm25, Retriever::Embedding, Retriever::Oracle]
    }

    #[test]
    fn query_text_uses_last_pair_only() {
        let t = turn("d", 3, "east please", &[("area", "east")]);
        assert_eq!(QueryText::from_turn(&t).as_str(), "reply 2 east please");
        let first = turn("d", 1, "hi", &[]);
        assert_eq!(QueryText::from_turn(&first).as_str(), "hi");
    }

    #[test]
    fn exclusion_rules() {
        let a1 = turn("a", 1, "x", &[]);
        let a2 = turn("a", 2, "y", &[]);
        let b1 = turn("b", 1, "x", &[]);
        assert!(exclusion_policy(&a1, &a2));
        assert!(!exclusion_policy(&a1, &b1));
        assert!(exclusion_policy(&a1, &a1));
        let loose = ExclusionPolicy { same_dialogue: false };
        assert!(!loose.excludes(&a1.id(), &a2.id()));
        assert!(loose.excludes(&a1.id(), &a1.id()));
    }

    #[test]
    fn single_entry_any_retriever() {
        let e = turn("e", 1, "a hotel", &[("stars", "3")]);
        let target = turn("t", 1, "a hotel", &[("stars", "4")]);
        let mut db = ExampleDatabase::from_turns([&e]);
        let mut table = EmbeddingTable::new(2);
        table.insert(e.id(), vec![1.0, 0.0]).unwrap();
        table.insert(target.id(), vec![0.5, 0.5]).unwrap();
        db.set_embeddings(table);
        for r in all() {
            let got = db.retrieve(&target, &r, 1).unwrap();
            assert_eq!(got.len(), 1, "{r:?}");
            assert_eq!(got[0].id(), e.id());
        }
    }

    #[test]
    fn oracle_prefers_identical_delta() {
        let target = turn("t", 1, "three star place", &[("stars", "3")]);
        let twin = turn("z", 1, "something else", &[("stars", "3")]);
        let other = turn("a", 1, "three star place", &[("area", "east")]);
        let db = ExampleDatabase::from_turns([&other, &twin]);
        assert_eq!(db.retrieve(&target, &Retriever::Oracle, 1).unwrap()[0].id(), twin.id());
    }

    #[test]
    fn embedding_dot_product_order() {
        let e1 = turn("e1", 1, "x", &[]);
        let e2 = turn("e2", 1, "y", &[]);
        let q = turn("q", 1, "z", &[]);
        let mut db = ExampleDatabase::from_turns([&e2, &e1]);
        let mut table = EmbeddingTable::new(2);
        table.insert(e1.id(), vec![1.0, 0.0]).unwrap();
        table.insert(e2.id(), vec![0.0, 1.0]).unwrap();
        table.insert(q.id(), vec![1.0, 0.0]).unwrap();
        db.set_embeddings(table);
        let got = db.retrieve(&q, &Retriever::Embedding, 2).unwrap();
        assert_eq!(got[0].id(), e1.id());
        assert_eq!(got[1].id(), e2.id());
    }

    #[test]
    fn missing_embedding_names_turn() {
        let e1 = turn("e1", 1, "x", &[]);
        let q = turn("q", 1, "z", &[]);
        let mut db = ExampleDatabase::from_turns([&e1]);
        let mut table = EmbeddingTable::new(1);
        table.insert(q.id(), vec![1.0]).unwrap();
        db.set_embeddings(table);
        match db.retrieve(&q, &Retriever::Embedding, 1) {
            Err(Error::MissingEmbedding(id)) => assert_eq!(id, e1.id()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_retriever_name() {
        assert!(matches!(Retriever::from_name("dense", 0), Err(Error::UnknownRetriever(_))));
        assert_eq!("oracle".parse::<Retriever>().unwrap(), Retriever::Oracle);
    }

    #[test]
    fn never_returns_target_or_same_dialogue() {
        let turns: Vec<TurnRecord> = (0..6)
            .flat_map(|d| (1..=3).map(move |t| turn(&format!("d{d}"), t, "find a hotel east", &[("area", "east")])))
            .collect();
        let mut db = ExampleDatabase::from_turns(&turns);
        let mut table = EmbeddingTable::new(1);
        for (i, t) in turns.iter().enumerate() {
            table.insert(t.id(), vec![i as f64]).unwrap();
        }
        db.set_embeddings(table);
        for target in &turns {
            for r in all() {
                let got = db.retrieve(target, &r, 5).unwrap();
                assert_eq!(got.len(), 5);
                assert!(got.iter().all(|c| c.dialogue_id != target.dialogue_id), "{r:?}");
            }
        }
    }

    #[test]
    fn k_larger_than_pool_returns_pool() {
        let a = turn("a", 1, "x", &[]);
        let b = turn("b", 1, "y", &[]);
        let db = ExampleDatabase::from_turns([&a, &b]);
        assert_eq!(db.retrieve(&a, &Retriever::Bm25, 5).unwrap().len(), 1);
        assert!(db.retrieve(&a, &Retriever::Bm25, 0).unwrap().is_empty());
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let turns: Vec<TurnRecord> = (0..30).map(|d| turn(&format!("d{d}"), 1, "x", &[])).collect();
        let db = ExampleDatabase::from_turns(&turns);
        let target = turn("q", 1, "x", &[]);
        let ids = |s| -> Vec<TurnId> {
            db.retrieve(&target, &Retriever::Random { seed: s }, 3)
                .unwrap()
                .iter()
                .map(|t| t.id())
                .collect()
        };
        assert_eq!(ids(1), ids(1));
        assert_ne!(ids(1), ids(2));
    }

    #[test]
    fn falls_back_to_other_domains() {
        let mut other = turn("o", 1, "x", &[]);
        other.domain = "flight".into();
        let db = ExampleDatabase::from_turns([&other]);
        let target = turn("t", 1, "x", &[]);
        for r in [Retriever::Bm25, Retriever::Oracle, Retriever::Random { seed: 0 }] {
            assert_eq!(db.retrieve(&target, &r, 1).unwrap()[0].id(), other.id());
        }
    }
}
