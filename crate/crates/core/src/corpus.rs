//! Canonical data model for single-domain dialogue corpora and slot schemas.
//!
//! Corpus files are line-delimited JSON, one dialogue per line:
//!
//! ```text
//! {"dialogue_id":"h-001","domain":"hotel","split":"train","turns":[
//!   {"utterances":[{"speaker":"user","text":"Find me a 3 star hotel."}],"state":{"stars":"3"}},
//!   {"utterances":[{"speaker":"system","text":"Any area?"},{"speaker":"user","text":"East."}],
//!    "state":{"stars":"3","area":"east"}}]}
//! ```
//!
//! The first turn carries only the user utterance; every later turn carries
//! the system reply followed by the next user utterance. Turn states are full
//! states keyed by slot name. Schema files are a JSON array of
//! `{domain, slot, kind, options, question}` objects.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotKey {
    pub domain: String,
    pub slot: String,
}

impl SlotKey {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>) -> Self {
        SlotKey {
            domain: domain.into(),
            slot: slot.into(),
        }
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.domain, self.slot)
    }
}

impl FromStr for SlotKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((d, sl)) if !d.is_empty() && !sl.is_empty() => Ok(SlotKey::new(d, sl)),
            _ => Err(Error::InvalidSchema(format!(
                "slot key {s:?} is not of the form domain-slot"
            ))),
        }
    }
}

impl Serialize for SlotKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Categorical,
    Extractive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchema {
    pub key: SlotKey,
    pub kind: SlotKind,
    pub options: Vec<String>,
    pub question: String,
}

#[derive(Serialize, Deserialize)]
struct SlotSchemaRecord {
    domain: String,
    slot: String,
    kind: SlotKind,
    #[serde(default)]
    options: Vec<String>,
    question: String,
}

impl SlotSchema {
    pub fn validate(&self) -> Result<()> {
        let key = &self.key;
        if key.domain.trim().is_empty() || key.slot.trim().is_empty() {
            return Err(Error::InvalidSchema(format!("empty domain or slot in {key}")));
        }
        if key.domain.contains('-') {
            return Err(Error::InvalidSchema(format!(
                "domain {:?} must not contain '-'",
                key.domain
            )));
        }
        if self.question.trim().is_empty() {
            return Err(Error::InvalidSchema(format!("slot {key} has an empty question")));
        }
        match self.kind {
            SlotKind::Categorical => {
                let distinct: BTreeSet<String> = self.options.iter().map(|o| normalize(o)).collect();
                if distinct.len() < 2 || distinct.contains("") {
                    return Err(Error::InvalidSchema(format!(
                        "categorical slot {key} needs at least two distinct non-empty options"
                    )));
                }
            }
            SlotKind::Extractive => {
                if !self.options.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "extractive slot {key} must not list options"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Serialize for SlotSchema {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SlotSchemaRecord {
            domain: self.key.domain.clone(),
            slot: self.key.slot.clone(),
            kind: self.kind,
            options: self.options.clone(),
            question: self.question.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SlotSchema {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SlotSchemaRecord::deserialize(d)?;
        Ok(SlotSchema {
            key: SlotKey::new(r.domain, r.slot),
            kind: r.kind,
            options: r.options,
            question: r.question,
        })
    }
}

/// The natural-language question asked for a slot. One question per slot,
/// returned verbatim from the schema.
pub fn question_for_slot(schema: &SlotSchema) -> &str {
    &schema.question
}

/// Parses a schema file body and validates every entry.
pub fn parse_schema(text: &str) -> Result<Vec<SlotSchema>> {
    let slots: Vec<SlotSchema> =
        serde_json::from_str(text).map_err(|e| Error::InvalidSchema(e.to_string()))?;
    let mut seen = HashSet::new();
    for s in &slots {
        s.validate()?;
        if !seen.insert(s.key.clone()) {
            return Err(Error::InvalidSchema(format!("duplicate slot {}", s.key)));
        }
    }
    Ok(slots)
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<SlotSchema>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "user",
            Speaker::System => "system",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

impl Utterance {
    pub fn user(text: impl Into<String>) -> Self {
        Utterance {
            speaker: Speaker::User,
            text: text.into(),
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Utterance {
            speaker: Speaker::System,
            text: text.into(),
        }
    }
}

/// Slot assignments for one turn. Empty slots are absent, never stored as "none".
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueState(BTreeMap<SlotKey, String>);

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &SlotKey) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: SlotKey, value: impl Into<String>) -> Option<String> {
        self.0.insert(key, value.into())
    }

    pub fn remove(&mut self, key: &SlotKey) -> Option<String> {
        self.0.remove(key)
    }

    pub fn contains(&self, key: &SlotKey) -> bool {
        self.0.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SlotKey, &str)> {
        self.0.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &SlotKey> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with every value passed through [`normalize`].
    pub fn normalized(&self) -> DialogueState {
        DialogueState(self.0.iter().map(|(k, v)| (k.clone(), normalize(v))).collect())
    }

    /// Same key set and same normalized values.
    pub fn matches(&self, other: &DialogueState) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && normalize(va) == normalize(vb))
    }
}

impl FromIterator<(SlotKey, String)> for DialogueState {
    fn from_iter<I: IntoIterator<Item = (SlotKey, String)>>(iter: I) -> Self {
        DialogueState(iter.into_iter().collect())
    }
}

/// `(dialogue_id, turn_index)`; rendered as `dialogue_id:turn_index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TurnId {
    pub dialogue_id: String,
    pub turn_index: usize,
}

impl TurnId {
    pub fn new(dialogue_id: impl Into<String>, turn_index: usize) -> Self {
        TurnId {
            dialogue_id: dialogue_id.into(),
            turn_index,
        }
    }
}

impl fmt::Display for TurnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dialogue_id, self.turn_index)
    }
}

impl FromStr for TurnId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (d, t) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Corpus(format!("turn id {s:?} is not dialogue_id:turn_index")))?;
        let turn_index = t
            .parse()
            .map_err(|_| Error::Corpus(format!("bad turn index in {s:?}")))?;
        Ok(TurnId::new(d, turn_index))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRecord {
    pub dialogue_id: String,
    /// 1-based.
    pub turn_index: usize,
    pub domain: String,
    /// `u_1, b_1, ..., b_{t-1}, u_t`; always `2t - 1` utterances.
    pub history: Vec<Utterance>,
    pub state: DialogueState,
    pub prev_state: DialogueState,
}

impl TurnRecord {
    pub fn id(&self) -> TurnId {
        TurnId::new(self.dialogue_id.clone(), self.turn_index)
    }

    pub fn last_user(&self) -> &Utterance {
        self.history.last().expect("history is never empty")
    }

    pub fn last_system(&self) -> Option<&Utterance> {
        self.history.len().checked_sub(2).map(|i| &self.history[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<TurnRecord>,
}

/// File-level turn: the new utterances of the turn plus its full state keyed by slot name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnEntry {
    pub utterances: Vec<Utterance>,
    #[serde(default)]
    pub state: BTreeMap<String, String>,
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueEntry {
    pub dialogue_id: String,
    pub domain: String,
    pub split: Split,
    pub turns: Vec<TurnEntry>,
    /// Set on memory-sample files to mark which turns were drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_turns: Option<Vec<usize>>,
}

impl DialogueEntry {
    /// Rebuilds the file representation of a dialogue.
    pub fn from_dialogue(dialogue: &Dialogue, domain: &str, split: Split) -> Self {
        let turns = dialogue
            .turns
            .iter()
            .map(|t| {
                let start = if t.turn_index == 1 { 0 } else { t.history.len() - 2 };
                TurnEntry {
                    utterances: t.history[start..].to_vec(),
                    state: t
                        .state
                        .iter()
                        .map(|(k, v)| (k.slot.clone(), v.to_string()))
                        .collect(),
                }
            })
            .collect();
        DialogueEntry {
            dialogue_id: dialogue.dialogue_id.clone(),
            domain: domain.to_string(),
            split,
            turns,
            selected_turns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub domain: String,
    pub schema: Vec<SlotSchema>,
    pub splits: BTreeMap<Split, Vec<Dialogue>>,
}

impl Corpus {
    /// Validates file-level dialogues against the schema of their domain.
    ///
    /// `schema` may hold slots of several domains; only the corpus domain is kept.
    pub fn build(schema: &[SlotSchema], entries: Vec<DialogueEntry>) -> Result<Corpus> {
        Self::build_located(schema, entries.into_iter().map(|e| (0, e)), Path::new("<memory>"))
    }

    fn build_located(
        schema: &[SlotSchema],
        entries: impl IntoIterator<Item = (usize, DialogueEntry)>,
        source: &Path,
    ) -> Result<Corpus> {
        let mut domain: Option<String> = None;
        let mut domain_schema: Vec<SlotSchema> = Vec::new();
        let mut splits: BTreeMap<Split, Vec<Dialogue>> = BTreeMap::new();
        let mut ids: HashSet<(Split, String)> = HashSet::new();

        for (line, entry) in entries {
            match &domain {
                None => {
                    domain_schema = schema
                        .iter()
                        .filter(|s| s.key.domain == entry.domain)
                        .cloned()
                        .collect();
                    if domain_schema.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "no slots defined for domain {:?}",
                            entry.domain
                        )));
                    }
                    for s in &domain_schema {
                        s.validate()?;
                    }
                    domain = Some(entry.domain.clone());
                }
                Some(d) if *d != entry.domain => {
                    return Err(Error::Parse {
                        path: source.to_path_buf(),
                        line,
                        message: format!(
                            "dialogue {} has domain {:?}, corpus domain is {d:?}",
                            entry.dialogue_id, entry.domain
                        ),
                    });
                }
                Some(_) => {}
            }
            if !ids.insert((entry.split, entry.dialogue_id.clone())) {
                return Err(Error::Corpus(format!(
                    "duplicate dialogue id {} in split {}",
                    entry.dialogue_id, entry.split
                )));
            }
            let dialogue = build_dialogue(&domain_schema, entry.clone(), line, source)?;
            splits.entry(entry.split).or_default().push(dialogue);
        }

        let domain = domain.ok_or_else(|| Error::Corpus("corpus contains no dialogues".into()))?;
        Ok(Corpus {
            domain,
            schema: domain_schema,
            splits,
        })
    }

    /// Parses corpus text (one dialogue per line; blank lines ignored).
    pub fn parse(text: &str, schema: &[SlotSchema], source: &Path) -> Result<Corpus> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: DialogueEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push((i + 1, entry));
        }
        Self::build_located(schema, entries, source)
    }

    pub fn dialogues(&self, split: Split) -> &[Dialogue] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn turns(&self, split: Split) -> impl Iterator<Item = &TurnRecord> {
        self.dialogues(split).iter().flat_map(|d| d.turns.iter())
    }

    pub fn slot(&self, key: &SlotKey) -> Option<&SlotSchema> {
        self.schema.iter().find(|s| &s.key == key)
    }

    /// Number of slots of interest for the domain.
    pub fn num_slots(&self) -> usize {
        self.schema.len()
    }

    /// Serializes one split back into corpus-file lines.
    pub fn to_jsonl(&self, split: Split) -> String {
        let mut out = String::new();
        for d in self.dialogues(split) {
            let entry = DialogueEntry::from_dialogue(d, &self.domain, split);
            out.push_str(&serde_json::to_string(&entry).expect("corpus entries serialize"));
            out.push('\n');
        }
        out
    }
}

fn build_dialogue(
    schema: &[SlotSchema],
    entry: DialogueEntry,
    line: usize,
    source: &Path,
) -> Result<Dialogue> {
    let id = entry.dialogue_id;
    if id.trim().is_empty() {
        return Err(Error::Parse {
            path: source.to_path_buf(),
            line,
            message: "empty dialogue_id".into(),
        });
    }
    if entry.turns.is_empty() {
        return Err(Error::Parse {
            path: source.to_path_buf(),
            line,
            message: format!("dialogue {id} has no turns"),
        });
    }

    let mut history: Vec<Utterance> = Vec::new();
    let mut prev_state = DialogueState::new();
    let mut turns = Vec::with_capacity(entry.turns.len());
    for (i, turn) in entry.turns.into_iter().enumerate() {
        let turn_index = i + 1;
        let expected: &[Speaker] = if turn_index == 1 {
            &[Speaker::User]
        } else {
            &[Speaker::System, Speaker::User]
        };
        let speakers: Vec<Speaker> = turn.utterances.iter().map(|u| u.speaker).collect();
        if speakers != expected {
            return Err(Error::Alternation {
                dialogue_id: id.clone(),
                turn_index,
                message: format!("expected speakers {expected:?}, found {speakers:?}"),
            });
        }
        if let Some(u) = turn.utterances.iter().find(|u| u.text.trim().is_empty()) {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line,
                message: format!("dialogue {id} turn {turn_index}: empty {} utterance", u.speaker),
            });
        }
        history.extend(turn.utterances);

        let mut state = DialogueState::new();
        for (slot, value) in turn.state {
            let Some(schema_slot) = schema.iter().find(|s| s.key.slot == slot) else {
                return Err(Error::SchemaViolation {
                    dialogue_id: id.clone(),
                    turn_index,
                    message: format!("unknown slot {slot:?}"),
                });
            };
            if value.trim().is_empty() {
                return Err(Error::SchemaViolation {
                    dialogue_id: id.clone(),
                    turn_index,
                    message: format!("slot {slot:?} has an empty value"),
                });
            }
            state.insert(schema_slot.key.clone(), value);
        }

        turns.push(TurnRecord {
            dialogue_id: id.clone(),
            turn_index,
            domain: schema[0].key.domain.clone(),
            history: history.clone(),
            state: state.clone(),
            prev_state,
        });
        prev_state = state;
    }
    Ok(Dialogue {
        dialogue_id: id,
        turns,
    })
}

/// Loads a corpus file and validates it against the schema file.
pub fn load_corpus(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Corpus> {
    let schema = load_schema(schema_path)?;
    load_corpus_with_schema(path, &schema)
}

pub fn load_corpus_with_schema(path: impl AsRef<Path>, schema: &[SlotSchema]) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse(&text, schema, path)
}
