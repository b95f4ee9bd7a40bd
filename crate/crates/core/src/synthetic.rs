//! Deterministic synthetic schema-guided corpora for demos, tests and smoke runs.
//!
//! Each domain gets a small slot schema; dialogues are generated turn by turn
//! from seeded actions (insert, update, delete, idle) and rendered with
//! templated utterances, so every turn's state is consistent with its history.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, DialogueEntry, SlotKey, SlotKind, SlotSchema, Speaker, Split, TurnEntry, Utterance};
use crate::error::{Error, Result};

struct SlotProfile {
    slot: &'static str,
    phrase: &'static str,
    question: &'static str,
    options: &'static [&'static str],
    values: &'static [&'static str],
}

const fn cat(slot: &'static str, phrase: &'static str, question: &'static str, options: &'static [&'static str]) -> SlotProfile {
    SlotProfile { slot, phrase, question, options, values: options }
}

const fn ext(slot: &'static str, phrase: &'static str, question: &'static str, values: &'static [&'static str]) -> SlotProfile {
    SlotProfile { slot, phrase, question, options: &[], values }
}

fn profile(domain: &str) -> Vec<SlotProfile> {
    match domain {
        "hotel" => vec![
            ext("name", "the hotel called", "What is the name of the hotel that the user wants?", &["hilton", "grand plaza", "sea breeze inn", "park lodge"]),
            cat("stars", "a hotel rated", "What is the hotel star rating the user wants?", &["1", "2", "3", "4", "5"]),
            ext("area", "a hotel in the", "What area does the user want the hotel in?", &["east", "west", "north", "south", "centre"]),
            cat("parking", "parking set to", "Does the user want parking at the hotel?", &["yes", "no"]),
        ],
        "restaurant" => vec![
            ext("food", "a place serving", "What type of food does the user want?", &["thai", "italian", "mexican", "indian", "korean"]),
            cat("price", "a price range that is", "What price range does the user want?", &["cheap", "moderate", "expensive"]),
            ext("city", "a restaurant in", "Which city is the restaurant in?", &["san jose", "oakland", "berkeley", "palo alto"]),
            ext("time", "a table at", "What time is the reservation for?", &["6 pm", "7 pm", "7:30 pm", "8 pm"]),
        ],
        "flight" => vec![
            ext("origin", "a flight leaving from", "Where does the user fly from?", &["boston", "seattle", "denver", "chicago"]),
            ext("destination", "a flight going to", "Where does the user fly to?", &["london", "paris", "tokyo", "new york"]),
            cat("seat", "a seat in", "Which seating class does the user want?", &["economy", "premium economy", "business"]),
            ext("date", "a flight on", "What date does the user want to fly?", &["march 3", "march 9", "april 1", "may 20"]),
        ],
        "movie" => vec![
            ext("title", "the movie", "Which movie does the user want to watch?", &["the matrix", "up", "heat", "alien"]),
            ext("theater", "a show at", "Which theater does the user want?", &["regal", "amc", "cinemark", "landmark"]),
            cat("format", "a screening in", "Which screening format does the user want?", &["standard", "imax", "3d"]),
        ],
        "alarm" => vec![
            ext("time", "an alarm at", "What time should the alarm go off?", &["6 am", "6:30 am", "7 am", "8 am"]),
            ext("label", "an alarm labeled", "What is the name of the alarm?", &["gym", "work", "meds", "wake up"]),
            cat("repeat", "an alarm that repeats", "Should the alarm repeat?", &["daily", "weekdays", "never"]),
        ],
        "taxi" => vec![
            ext("pickup", "a pickup at", "Where should the taxi pick the user up?", &["the station", "the airport", "main street", "the mall"]),
            ext("dropoff", "a ride to", "Where is the taxi going?", &["downtown", "the museum", "the harbor", "campus"]),
            cat("seats", "a car with seats for", "How many seats does the user need?", &["1", "2", "3", "4"]),
        ],
        _ => vec![
            ext("name", "the item called", "What is the name of the item the user wants?", &["alpha", "beta", "gamma", "delta"]),
            cat("size", "the size", "What size does the user want?", &["small", "medium", "large"]),
            ext("when", "it scheduled for", "When does the user want it?", &["today", "tomorrow", "friday", "next week"]),
        ],
    }
}

/// Slot schemas for the given domains, in domain then slot order.
pub fn schema_for(domains: &[impl AsRef<str>]) -> Vec<SlotSchema> {
    domains
        .iter()
        .flat_map(|d| {
            let d = d.as_ref();
            profile(d).into_iter().map(move |p| SlotSchema {
                key: SlotKey::new(d, p.slot),
                kind: if p.options.is_empty() { SlotKind::Extractive } else { SlotKind::Categorical },
                options: p.options.iter().map(|o| o.to_string()).collect(),
                question: p.question.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub domains: Vec<String>,
    pub train_dialogues: usize,
    pub dev_dialogues: usize,
    pub test_dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    pub seed: u64,
    /// Suffix extractive values with a dialogue-specific number so identical
    /// deltas across dialogues are rare.
    pub unique_values: bool,
    /// Allow turns that leave the state unchanged.
    pub idle_turns: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            domains: vec!["hotel".into(), "restaurant".into(), "flight".into()],
            train_dialogues: 24,
            dev_dialogues: 4,
            test_dialogues: 8,
            min_turns: 3,
            max_turns: 7,
            seed: 7,
            unique_values: false,
            idle_turns: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub schema: Vec<SlotSchema>,
    pub corpora: Vec<Corpus>,
}

impl SyntheticData {
    pub fn corpus(&self, domain: &str) -> Option<&Corpus> {
        self.corpora.iter().find(|c| c.domain == domain)
    }

    /// Writes `schema.json` and one `<domain>.jsonl` per corpus into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let schema_path = dir.join("schema.json");
        let schema = serde_json::to_string_pretty(&self.schema).expect("schema serializes");
        std::fs::write(&schema_path, schema).map_err(|e| Error::io(&schema_path, e))?;
        let mut paths = vec![schema_path];
        for c in &self.corpora {
            let path = dir.join(format!("{}.jsonl", c.domain));
            let body: String = [Split::Train, Split::Dev, Split::Test].iter().map(|s| c.to_jsonl(*s)).collect();
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    let schema = schema_for(&config.domains);
    let mut corpora = Vec::new();
    for (di, domain) in config.domains.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((di as u64 + 1) << 32));
        let mut entries = Vec::new();
        let mut serial = 0usize;
        for (split, n) in [
            (Split::Train, config.train_dialogues),
            (Split::Dev, config.dev_dialogues),
            (Split::Test, config.test_dialogues),
        ] {
            for i in 0..n {
                serial += 1;
                let id = format!("{domain}-{split}-{i:03}");
                entries.push(dialogue(&mut rng, domain, &id, split, serial, config));
            }
        }
        corpora.push(Corpus::build(&schema, entries)?);
    }
    Ok(SyntheticData { schema, corpora })
}

/// Corpus where every test dialogue is duplicated into train under a new id and
/// with reworded utterances, so every test turn has a train twin with an
/// identical delta and identical state. Every turn inserts or updates one
/// extractive slot with a value unique to that turn, so the twin is the only
/// candidate with SCS 1.
pub fn twin_fixture(config: &SyntheticConfig) -> Result<SyntheticData> {
    let config = SyntheticConfig {
        unique_values: true,
        idle_turns: false,
        ..config.clone()
    };
    let base = generate(&config)?;
    let mut corpora = Vec::new();
    for c in &base.corpora {
        let mut entries: Vec<DialogueEntry> = Vec::new();
        for split in [Split::Train, Split::Dev, Split::Test] {
            for d in c.dialogues(split) {
                entries.push(DialogueEntry::from_dialogue(d, &c.domain, split));
            }
        }
        for d in c.dialogues(Split::Test) {
            let mut twin = DialogueEntry::from_dialogue(d, &c.domain, Split::Train);
            twin.dialogue_id = format!("{}-twin", d.dialogue_id);
            for turn in &mut twin.turns {
                for u in &mut turn.utterances {
                    u.text = match u.speaker {
                        Speaker::User => format!("so {}", u.text),
                        Speaker::System => format!("okay. {}", u.text),
                    };
                }
            }
            entries.push(twin);
        }
        corpora.push(Corpus::build(&base.schema, entries)?);
    }
    Ok(SyntheticData {
        schema: base.schema,
        corpora,
    })
}

enum Action {
    Insert(usize, String),
    Update(usize, String),
    Delete(usize),
    Idle,
}

fn dialogue(rng: &mut ChaCha8Rng, domain: &str, id: &str, split: Split, serial: usize, config: &SyntheticConfig) -> DialogueEntry {
    let slots = profile(domain);
    let n_turns = rng.random_range(config.min_turns..=config.max_turns.max(config.min_turns));
    let mut state: Vec<Option<String>> = vec![None; slots.len()];
    let mut turns = Vec::with_capacity(n_turns);
    let mut last_asked: Option<usize> = None;

    for t in 0..n_turns {
        let value_for = |rng: &mut ChaCha8Rng, s: usize, current: Option<&String>| -> String {
            let p = &slots[s];
            loop {
                let mut v = p.values.choose(rng).expect("values").to_string();
                if config.unique_values && p.options.is_empty() {
                    v = format!("{v} {serial}.{}", t + 1);
                }
                if Some(&v) != current || (p.values.len() < 2 && !config.unique_values) {
                    return v;
                }
            }
        };
        // With unique values only extractive slots change, so every delta is unique to its dialogue.
        let usable = |s: &usize| !config.unique_values || slots[*s].options.is_empty();
        let filled: Vec<usize> = (0..slots.len()).filter(|&s| state[s].is_some()).filter(usable).collect();
        let empty: Vec<usize> = (0..slots.len()).filter(|&s| state[s].is_none()).filter(usable).collect();
        let roll: f64 = rng.random();
        let idle_ok = config.idle_turns && t == 0 && roll < 0.25
            || config.idle_turns && t > 0 && roll < 0.15;
        let action = if idle_ok {
            Action::Idle
        } else if !empty.is_empty() && (filled.is_empty() || roll < 0.7) {
            let s = *empty.choose(rng).unwrap();
            Action::Insert(s, value_for(rng, s, None))
        } else if !filled.is_empty() && (roll < 0.92 || filled.len() < 2 || config.unique_values) {
            let s = *filled.choose(rng).unwrap();
            Action::Update(s, value_for(rng, s, state[s].as_ref()))
        } else {
            Action::Delete(*filled.choose(rng).unwrap())
        };

        let user = match &action {
            Action::Insert(s, v) => {
                state[*s] = Some(v.clone());
                let opener = ["I'd like", "Can you find", "Please get me", "I want"].choose(rng).unwrap();
                format!("{opener} {} {v}.", slots[*s].phrase)
            }
            Action::Update(s, v) => {
                state[*s] = Some(v.clone());
                format!("Actually, change that to {} {v} instead.", slots[*s].phrase)
            }
            Action::Delete(s) => {
                state[*s] = None;
                format!("Never mind about {}, I don't care.", slots[*s].phrase)
            }
            Action::Idle => ["Hello, I need some help.", "Thanks, that sounds fine.", "Hmm, let me think."]
                .choose(rng)
                .unwrap()
                .to_string(),
        };
        let mut utterances = Vec::new();
        if t > 0 {
            let sys = match last_asked {
                Some(s) => format!("Sure. {}", slots[s]
                        .question
                        .replace("Does the user", "Do you")
                        .replace("does the user", "do you")
                        .replace("the user wants", "you want")
                        .replace("the user", "you")),
                None => "Is there anything else I can help with?".to_string(),
            };
            utterances.push(Utterance::system(sys));
        }
        utterances.push(Utterance::user(user));
        last_asked = (0..slots.len()).find(|&s| state[s].is_none());
        turns.push(TurnEntry {
            utterances,
            state: slots
                .iter()
                .zip(&state)
                .filter_map(|(p, v)| v.as_ref().map(|v| (p.slot.to_string(), v.clone())))
                .collect(),
        });
    }
    DialogueEntry {
        dialogue_id: id.to_string(),
        domain: domain.to_string(),
        split,
        turns,
        selected_turns: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::turn_delta;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.corpora, b.corpora);
        assert_eq!(a.corpora.len(), 3);
        for c in &a.corpora {
            assert_eq!(c.dialogues(Split::Train).len(), 24);
            assert_eq!(c.dialogues(Split::Test).len(), 8);
        }
    }

    #[test]
    fn twins_share_delta_and_state() {
        let data = twin_fixture(&SyntheticConfig::default()).unwrap();
        for c in &data.corpora {
            for d in c.dialogues(Split::Test) {
                let twin = c
                    .dialogues(Split::Train)
                    .iter()
                    .find(|x| x.dialogue_id == format!("{}-twin", d.dialogue_id))
                    .unwrap();
                for (a, b) in d.turns.iter().zip(&twin.turns) {
                    assert_eq!(a.state, b.state);
                    assert_eq!(turn_delta(a), turn_delta(b));
                    assert!(!turn_delta(a).is_empty());
                }
            }
        }
    }

    #[test]
    fn write_and_reload() {
        let data = generate(&SyntheticConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = data.write_to(dir.path()).unwrap();
        let c = crate::corpus::load_corpus(&paths[1], &paths[0]).unwrap();
        assert_eq!(&c, &data.corpora[0]);
    }
}
