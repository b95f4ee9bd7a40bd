//! Replay memory selection from a previous service's training dialogues.
//!
//! All strategies are pure functions of `(dialogues, M, seed)` and return
//! turns in corpus order. Dialogue draws use one seeded permutation of the
//! dialogue list; taking a prefix of it is a uniform draw without replacement.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dialogue, DialogueEntry, Split, TurnRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    Turn,
    Dialogue,
    DialogueFair,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "turn" => Ok(SamplingStrategy::Turn),
            "dialogue" => Ok(SamplingStrategy::Dialogue),
            "dialogue_fair" => Ok(SamplingStrategy::DialogueFair),
            _ => Err(crate::Error::Config(format!("unknown sampling strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryBudget {
    /// Turns per previous service.
    pub m: usize,
    pub strategy: SamplingStrategy,
    pub seed: u64,
    #[serde(default = "default_turns_per_dialogue")]
    pub turns_per_dialogue_estimate: usize,
}

fn default_turns_per_dialogue() -> usize {
    10
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget {
            m: 0,
            strategy: SamplingStrategy::Dialogue,
            seed: 0,
            turns_per_dialogue_estimate: default_turns_per_dialogue(),
        }
    }
}

impl MemoryBudget {
    pub fn sample<'a>(&self, dialogues: &'a [Dialogue]) -> Vec<&'a TurnRecord> {
        self.sample_with_seed(dialogues, self.seed)
    }

    pub fn sample_with_seed<'a>(&self, dialogues: &'a [Dialogue], seed: u64) -> Vec<&'a TurnRecord> {
        match self.strategy {
            SamplingStrategy::Turn => sample_turn_level(dialogues, self.m, seed),
            SamplingStrategy::Dialogue => {
                sample_dialogue_level_with(dialogues, self.m, seed, self.turns_per_dialogue_estimate).turns
            }
            SamplingStrategy::DialogueFair => sample_dialogue_fair(dialogues, self.m, seed).turns,
        }
    }
}

/// Turns plus the dialogues (indices into the input) drawn to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueSample<'a> {
    pub turns: Vec<&'a TurnRecord>,
    pub drawn: Vec<usize>,
}

/// Uniform sample of `m` turns from the flattened pool; saturates at the pool size.
pub fn sample_turn_level(dialogues: &[Dialogue], m: usize, seed: u64) -> Vec<&TurnRecord> {
    let pool: Vec<&TurnRecord> = dialogues.iter().flat_map(|d| d.turns.iter()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pick(&pool, m, &mut rng)
}

pub fn sample_dialogue_level(dialogues: &[Dialogue], m: usize, seed: u64) -> DialogueSample<'_> {
    sample_dialogue_level_with(dialogues, m, seed, default_turns_per_dialogue())
}

/// Draws `max(1, m / turns_per_dialogue)` dialogues, then `m` turns from their
/// pooled turns. A pool smaller than `m` keeps drawing dialogues (the fair rule)
/// until it reaches `m` or the dialogues run out.
pub fn sample_dialogue_level_with(
    dialogues: &[Dialogue],
    m: usize,
    seed: u64,
    turns_per_dialogue: usize,
) -> DialogueSample<'_> {
    if m == 0 || dialogues.is_empty() {
        return DialogueSample {
            turns: Vec::new(),
            drawn: Vec::new(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = permutation(dialogues.len(), &mut rng);
    let want = (m / turns_per_dialogue.max(1)).max(1).min(order.len());
    let mut drawn: Vec<usize> = order[..want].to_vec();
    let mut pooled: usize = drawn.iter().map(|&i| dialogues[i].turns.len()).sum();
    for &i in &order[want..] {
        if pooled >= m {
            break;
        }
        drawn.push(i);
        pooled += dialogues[i].turns.len();
    }
    finish(dialogues, drawn, m, &mut rng)
}

/// Draws dialogues until their turns reach `m`, then samples exactly `m` turns.
pub fn sample_dialogue_fair(dialogues: &[Dialogue], m: usize, seed: u64) -> DialogueSample<'_> {
    if m == 0 || dialogues.is_empty() {
        return DialogueSample {
            turns: Vec::new(),
            drawn: Vec::new(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = permutation(dialogues.len(), &mut rng);
    let mut drawn = Vec::new();
    let mut pooled = 0;
    for i in order {
        if pooled >= m {
            break;
        }
        drawn.push(i);
        pooled += dialogues[i].turns.len();
    }
    finish(dialogues, drawn, m, &mut rng)
}

fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn finish<'a>(dialogues: &'a [Dialogue], drawn: Vec<usize>, m: usize, rng: &mut ChaCha8Rng) -> DialogueSample<'a> {
    let mut sorted = drawn.clone();
    sorted.sort_unstable();
    let pool: Vec<&TurnRecord> = sorted.iter().flat_map(|&i| dialogues[i].turns.iter()).collect();
    DialogueSample {
        turns: pick(&pool, m, rng),
        drawn,
    }
}

fn pick<'a>(pool: &[&'a TurnRecord], m: usize, rng: &mut ChaCha8Rng) -> Vec<&'a TurnRecord> {
    if m >= pool.len() {
        return pool.to_vec();
    }
    let mut idx = index::sample(rng, pool.len(), m).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Memory sample of a corpus's train split as corpus-file entries.
///
/// Each dialogue with at least one drawn turn is written whole, with
/// `selected_turns` listing the drawn turn indices.
pub fn sample_entries(corpus: &Corpus, budget: &MemoryBudget) -> Vec<DialogueEntry> {
    let dialogues = corpus.dialogues(Split::Train);
    let picked = budget.sample(dialogues);
    dialogues
        .iter()
        .filter_map(|d| {
            let sel: Vec<usize> = picked
                .iter()
                .filter(|t| t.dialogue_id == d.dialogue_id)
                .map(|t| t.turn_index)
                .collect();
            (!sel.is_empty()).then(|| DialogueEntry {
                selected_turns: Some(sel),
                ..DialogueEntry::from_dialogue(d, &corpus.domain, Split::Train)
            })
        })
        .collect()
}
