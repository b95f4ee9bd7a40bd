//! Converter from Schema-Guided-Dialogue style releases to corpus files.
//!
//! Input layout: `<root>/{train,dev,test}/schema.json` plus `dialogues_*.json`
//! files, each a JSON array of dialogues with `services` and alternating
//! USER/SYSTEM `turns` whose user frames carry `state.slot_values`.
//!
//! Only single-service dialogues are kept. Each service becomes one domain
//! (lowercased service name). A slot whose value list holds several
//! alternatives keeps the first. Questions are built from slot descriptions:
//! "Name of the hotel" becomes "What is the name of the hotel that the user wants?".

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{Corpus, DialogueEntry, SlotKey, SlotKind, SlotSchema, Split, TurnEntry, Utterance};
use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Deserialize)]
struct SgdService {
    service_name: String,
    slots: Vec<SgdSlot>,
}

#[derive(Debug, Deserialize)]
struct SgdSlot {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    is_categorical: bool,
    #[serde(default)]
    possible_values: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SgdDialogue {
    dialogue_id: String,
    services: Vec<String>,
    turns: Vec<SgdTurn>,
}

#[derive(Debug, Deserialize)]
struct SgdTurn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<SgdFrame>,
}

#[derive(Debug, Deserialize)]
struct SgdFrame {
    service: String,
    #[serde(default)]
    state: Option<SgdState>,
}

#[derive(Debug, Deserialize)]
struct SgdState {
    #[serde(default)]
    slot_values: BTreeMap<String, Vec<String>>,
}

pub fn domain_name(service: &str) -> String {
    service.to_lowercase().replace('-', "_")
}

pub fn question_from_description(description: &str, slot: &str) -> String {
    let d = description.trim().trim_end_matches('.');
    let d = if d.is_empty() { slot.replace('_', " ") } else { d.to_string() };
    let mut chars = d.chars();
    let d = match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => d,
    };
    format!("What is the {d} that the user wants?")
}

fn slot_schema(domain: &str, slot: &SgdSlot) -> SlotSchema {
    let categorical = slot.is_categorical && slot.possible_values.len() >= 2;
    SlotSchema {
        key: SlotKey::new(domain, slot.name.clone()),
        kind: if categorical { SlotKind::Categorical } else { SlotKind::Extractive },
        options: if categorical { slot.possible_values.clone() } else { Vec::new() },
        question: question_from_description(&slot.description, &slot.name),
    }
}

/// Converted data: merged schema and per-domain dialogue entries.
#[derive(Debug, Clone, Default)]
pub struct Converted {
    pub schema: Vec<SlotSchema>,
    pub dialogues: BTreeMap<String, Vec<DialogueEntry>>,
    /// Multi-service or otherwise unusable dialogues that were dropped.
    pub skipped: usize,
}

impl Converted {
    /// Loads and validates every converted domain.
    pub fn corpora(&self) -> Result<Vec<Corpus>> {
        self.dialogues
            .values()
            .map(|d| Corpus::build(&self.schema, d.clone()))
            .collect()
    }

    /// Writes `schema.json` and one `<domain>.jsonl` per domain; returns the written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let schema_path = dir.join("schema.json");
        let text = serde_json::to_string_pretty(&self.schema).expect("serializable");
        std::fs::write(&schema_path, text + "\n").map_err(|e| Error::io(&schema_path, e))?;
        let mut out = vec![schema_path];
        for (domain, entries) in &self.dialogues {
            let path = dir.join(format!("{domain}.jsonl"));
            jsonl::write(&path, entries)?;
            out.push(path);
        }
        Ok(out)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn convert_dialogue(d: SgdDialogue, split: Split, known: &BTreeMap<String, Vec<String>>) -> Option<DialogueEntry> {
    let [service] = d.services.as_slice() else {
        return None;
    };
    let slots = known.get(service)?;
    let mut turns = Vec::new();
    let mut pending_system: Option<String> = None;
    for t in d.turns {
        match t.speaker.to_ascii_uppercase().as_str() {
            "SYSTEM" => pending_system = Some(t.utterance),
            "USER" => {
                let mut utterances = Vec::with_capacity(2);
                match (turns.is_empty(), pending_system.take()) {
                    (true, _) => {}
                    (false, Some(s)) => utterances.push(Utterance::system(s)),
                    (false, None) => return None,
                }
                utterances.push(Utterance::user(t.utterance));
                let state = t
                    .frames
                    .iter()
                    .find(|f| &f.service == service)
                    .and_then(|f| f.state.as_ref())
                    .map(|s| {
                        s.slot_values
                            .iter()
                            .filter(|(k, _)| slots.contains(k))
                            .filter_map(|(k, v)| {
                                let v = v.first()?.trim();
                                (!v.is_empty()).then(|| (k.clone(), v.to_string()))
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                turns.push(TurnEntry { utterances, state });
            }
            _ => return None,
        }
    }
    if turns.is_empty() || turns.iter().flat_map(|t| &t.utterances).any(|u| u.text.trim().is_empty()) {
        return None;
    }
    Some(DialogueEntry {
        dialogue_id: d.dialogue_id,
        domain: domain_name(service),
        split,
        turns,
        selected_turns: None,
    })
}

/// Converts an SGD-style release rooted at `root`. `services` limits the kept services when non-empty.
pub fn convert_sgd(root: &Path, services: &[String]) -> Result<Converted> {
    let mut out = Converted::default();
    let mut schema: BTreeMap<SlotKey, SlotSchema> = BTreeMap::new();
    let mut slot_names: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for split in [Split::Train, Split::Dev, Split::Test] {
        let dir = root.join(split.to_string());
        if !dir.is_dir() {
            continue;
        }
        let svcs: Vec<SgdService> = read_json(&dir.join("schema.json"))?;
        for s in svcs {
            if !services.is_empty() && !services.contains(&s.service_name) {
                continue;
            }
            let domain = domain_name(&s.service_name);
            for slot in &s.slots {
                let sc = slot_schema(&domain, slot);
                schema.entry(sc.key.clone()).or_insert(sc);
            }
            slot_names.insert(s.service_name.clone(), s.slots.iter().map(|x| x.name.clone()).collect());
        }

        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("dialogues") && n.ends_with(".json"))
            })
            .collect();
        files.sort();
        for f in files {
            let dialogues: Vec<SgdDialogue> = read_json(&f)?;
            for d in dialogues {
                match convert_dialogue(d, split, &slot_names) {
                    Some(e) => out.dialogues.entry(e.domain.clone()).or_default().push(e),
                    None => out.skipped += 1,
                }
            }
        }
    }
    if out.dialogues.is_empty() {
        return Err(Error::Corpus(format!("no single-service dialogues found under {}", root.display())));
    }
    let used: std::collections::BTreeSet<&String> = out.dialogues.keys().collect();
    out.schema = schema.into_values().filter(|s| used.contains(&s.key.domain)).collect();
    Ok(out)
}
