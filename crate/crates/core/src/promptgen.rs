//! Per-slot example-guided QA prompts and answer aggregation.
//!
//! Prompt layout, tokens separated by single spaces:
//!
//! ```text
//! <question> [opt] <o1> [opt] <o2> ... [example] <history> Answer: <value> ... [target] <history> Answer:
//! ```
//!
//! * `[opt] <option>` appears once per option, categorical slots only.
//! * One `[example] <history> Answer: <value>` block per in-context example,
//!   `<value>` being the example turn's value for the same slot or `none`.
//! * `[target] <history> Answer:` always closes the prompt.
//! * `<history>` is the turn history rendered as `user: ...` / `system: ...`
//!   segments in dialogue order.
//! * With lowercasing on (the default) utterances and example answers are
//!   normalized; the question, options and markers keep their case.
//! * Marker tokens occurring inside content are defused by dropping their brackets.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{question_for_slot, DialogueState, SlotKey, SlotKind, SlotSchema, TurnId, TurnRecord};
use crate::error::{Error, Result};
use crate::retrieval::{ExampleDatabase, Retriever};
use crate::text::{is_none_answer, normalize, NONE_ANSWER};

pub const OPT_MARKER: &str = "[opt]";
pub const EXAMPLE_MARKER: &str = "[example]";
pub const TARGET_MARKER: &str = "[target]";
pub const ANSWER_CUE: &str = "Answer:";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub slot: SlotKey,
}

impl InstanceId {
    pub fn turn_id(&self) -> TurnId {
        TurnId::new(self.dialogue_id.clone(), self.turn_index)
    }
}

impl std::fmt::Display for InstanceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.dialogue_id, self.turn_index, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAInstance {
    pub instance_id: InstanceId,
    pub prompt: String,
    pub gold_answer: String,
    pub example_ids: Vec<TurnId>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub instance_id: InstanceId,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub lowercase: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions { lowercase: true }
    }
}

fn defuse(text: &str) -> String {
    text.replace(OPT_MARKER, "opt")
        .replace(EXAMPLE_MARKER, "example")
        .replace(TARGET_MARKER, "target")
}

fn content(text: &str, opts: PromptOptions) -> String {
    let collapsed = if opts.lowercase {
        normalize(text)
    } else {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    };
    defuse(&collapsed)
}

fn render_history(turn: &TurnRecord, opts: PromptOptions, out: &mut String) {
    for u in &turn.history {
        out.push(' ');
        out.push_str(&u.speaker.to_string());
        out.push_str(": ");
        out.push_str(&content(&u.text, opts));
    }
}

/// The gold answer of `turn` for `slot`: its value verbatim, or `none`.
pub fn slot_answer(turn: &TurnRecord, slot: &SlotKey) -> String {
    turn.state.get(slot).unwrap_or(NONE_ANSWER).to_string()
}

pub fn serialize_instance(
    schema: &SlotSchema,
    target: &TurnRecord,
    examples: &[(&TurnRecord, String)],
    opts: PromptOptions,
) -> Result<QAInstance> {
    let mut prompt = content(question_for_slot(schema), PromptOptions { lowercase: false });
    if schema.kind == SlotKind::Categorical {
        if schema.options.is_empty() {
            return Err(Error::Prompt(format!("categorical slot {} has no options", schema.key)));
        }
        for o in &schema.options {
            prompt.push(' ');
            prompt.push_str(OPT_MARKER);
            prompt.push(' ');
            prompt.push_str(&content(o, PromptOptions { lowercase: false }));
        }
    }
    for (ex, answer) in examples {
        if answer.trim().is_empty() {
            return Err(Error::Prompt(format!(
                "example {} has no answer for slot {}",
                ex.id(),
                schema.key
            )));
        }
        prompt.push(' ');
        prompt.push_str(EXAMPLE_MARKER);
        render_history(ex, opts, &mut prompt);
        prompt.push(' ');
        prompt.push_str(ANSWER_CUE);
        prompt.push(' ');
        prompt.push_str(&content(answer, opts));
    }
    prompt.push(' ');
    prompt.push_str(TARGET_MARKER);
    render_history(target, opts, &mut prompt);
    prompt.push(' ');
    prompt.push_str(ANSWER_CUE);

    Ok(QAInstance {
        instance_id: InstanceId {
            dialogue_id: target.dialogue_id.clone(),
            turn_index: target.turn_index,
            slot: schema.key.clone(),
        },
        prompt,
        gold_answer: slot_answer(target, &schema.key),
        example_ids: examples.iter().map(|(e, _)| e.id()).collect(),
        k: examples.len(),
    })
}

/// One instance per schema slot; the k examples are retrieved once for the turn.
pub fn build_instances(
    target: &TurnRecord,
    schema: &[SlotSchema],
    retriever: &Retriever,
    db: &ExampleDatabase,
    k: usize,
    opts: PromptOptions,
) -> Result<Vec<QAInstance>> {
    let examples = db.retrieve(target, retriever, k)?;
    schema
        .iter()
        .map(|s| {
            let ex: Vec<(&TurnRecord, String)> =
                examples.iter().map(|e| (*e, slot_answer(e, &s.key))).collect();
            serialize_instance(s, target, &ex, opts)
        })
        .collect()
}

/// Answers of the `[example]` blocks of a prompt, in order.
pub fn example_answers(prompt: &str) -> Vec<String> {
    let body = match prompt.rfind(TARGET_MARKER) {
        Some(i) => &prompt[..i],
        None => prompt,
    };
    body.split(EXAMPLE_MARKER)
        .skip(1)
        .map(|block| {
            let cue = format!(" {ANSWER_CUE}");
            match block.rfind(&cue) {
                Some(i) => block[i + cue.len()..].trim().to_string(),
                None => String::new(),
            }
        })
        .collect()
}

/// Checks marker counts and the question → options → examples → target → cue order.
pub fn validate_prompt(prompt: &str, k: usize, options: usize) -> Result<()> {
    let fail = |m: String| Err(Error::Prompt(m));
    let count = |m: &str| prompt.matches(m).count();
    if count(TARGET_MARKER) != 1 {
        return fail(format!("expected one {TARGET_MARKER}, found {}", count(TARGET_MARKER)));
    }
    if count(EXAMPLE_MARKER) != k {
        return fail(format!("expected {k} {EXAMPLE_MARKER}, found {}", count(EXAMPLE_MARKER)));
    }
    if count(OPT_MARKER) != options {
        return fail(format!("expected {options} {OPT_MARKER}, found {}", count(OPT_MARKER)));
    }
    if !prompt.ends_with(&format!(" {ANSWER_CUE}")) {
        return fail("prompt does not end with the answer cue".into());
    }
    let target = prompt.find(TARGET_MARKER).unwrap();
    let first_example = prompt.find(EXAMPLE_MARKER).unwrap_or(target);
    let last_opt = prompt.rfind(OPT_MARKER);
    let first_opt = prompt.find(OPT_MARKER).unwrap_or(first_example);
    if first_opt == 0 || first_example == 0 {
        return fail("prompt does not start with a question".into());
    }
    if last_opt.is_some_and(|o| o > first_example) || first_example > target {
        return fail("markers out of order".into());
    }
    if prompt[target..].matches(ANSWER_CUE).count() != 1 {
        return fail("target block must contain exactly one answer cue".into());
    }
    Ok(())
}

/// Folds one turn's per-slot answers back into a dialogue state.
///
/// `none` answers are absences; other answers are kept verbatim.
pub fn aggregate_answers(answers: &[AnswerRecord], schema: &[SlotSchema]) -> Result<DialogueState> {
    let mut by_slot: BTreeMap<&SlotKey, &AnswerRecord> = BTreeMap::new();
    let mut turns = HashSet::new();
    for a in answers {
        if !schema.iter().any(|s| s.key == a.instance_id.slot) {
            return Err(Error::AnswerValidation(format!("unknown slot in {}", a.instance_id)));
        }
        if by_slot.insert(&a.instance_id.slot, a).is_some() {
            return Err(Error::AnswerValidation(format!("duplicate answer for {}", a.instance_id)));
        }
        if a.answer.trim().is_empty() {
            return Err(Error::AnswerValidation(format!("empty answer for {}", a.instance_id)));
        }
        turns.insert(a.instance_id.turn_id());
    }
    if turns.len() > 1 {
        return Err(Error::AnswerValidation("answers span several turns".into()));
    }
    let missing: Vec<String> = schema
        .iter()
        .filter(|s| !by_slot.contains_key(&s.key))
        .map(|s| s.key.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::AnswerValidation(format!("missing answers for {}", missing.join(", "))));
    }
    Ok(by_slot
        .into_iter()
        .filter(|(_, a)| !is_none_answer(&a.answer))
        .map(|(k, a)| (k.clone(), a.answer.trim().to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_schema, Utterance};

    fn schema() -> Vec<SlotSchema> {
        parse_schema(
            r#"[
            {"domain":"hotel","slot":"stars","kind":"categorical","options":["1","2","3","4","5"],"question":"What is the hotel star rating the user wants?"},
            {"domain":"hotel","slot":"area","kind":"extractive","question":"What area does the user want?"}
        ]"#,
        )
        .unwrap()
    }

    fn find_hotel() -> TurnRecord {
        TurnRecord {
            dialogue_id: "t".into(),
            turn_index: 1,
            domain: "hotel".into(),
            history: vec![Utterance::user("Find me a 3 star hotel.")],
            state: [(SlotKey::new("hotel", "stars"), "3".to_string())].into_iter().collect(),
            prev_state: DialogueState::new(),
        }
    }

    fn east_example() -> TurnRecord {
        TurnRecord {
            dialogue_id: "e".into(),
            turn_index: 2,
            domain: "hotel".into(),
            history: vec![
                Utterance::user("I need a room."),
                Utterance::system("Where?"),
                Utterance::user("In the East."),
            ],
            state: [(SlotKey::new("hotel", "area"), "east".to_string())].into_iter().collect(),
            prev_state: DialogueState::new(),
        }
    }

    #[test]
    fn categorical_zero_shot_layout() {
        let inst = serialize_instance(&schema()[0], &find_hotel(), &[], PromptOptions::default()).unwrap();
        assert_eq!(
            inst.prompt,
            "What is the hotel star rating the user wants? [opt] 1 [opt] 2 [opt] 3 [opt] 4 [opt] 5 [target] user: find me a 3 star hotel. Answer:"
        );
        assert_eq!(inst.gold_answer, "3");
        assert_eq!(inst.k, 0);
        validate_prompt(&inst.prompt, 0, 5).unwrap();
    }

    #[test]
    fn absent_slot_gold_is_none() {
        let inst = serialize_instance(&schema()[1], &find_hotel(), &[], PromptOptions::default()).unwrap();
        assert_eq!(inst.gold_answer, "none");
    }

    #[test]
    fn one_example_block_precedes_target() {
        let ex = east_example();
        let inst =
            serialize_instance(&schema()[1], &find_hotel(), &[(&ex, "east".into())], PromptOptions::default()).unwrap();
        let block = "[example] user: i need a room. system: where? user: in the east. Answer: east";
        let at = inst.prompt.find(block).expect("example block present");
        assert!(at < inst.prompt.find("[target]").unwrap());
        assert_eq!(inst.example_ids, vec![ex.id()]);
        validate_prompt(&inst.prompt, 1, 0).unwrap();
        assert_eq!(example_answers(&inst.prompt), ["east"]);
    }

    #[test]
    fn errors() {
        let mut bad = schema()[0].clone();
        bad.options.clear();
        assert!(serialize_instance(&bad, &find_hotel(), &[], PromptOptions::default()).is_err());
        let ex = east_example();
        assert!(serialize_instance(&schema()[1], &find_hotel(), &[(&ex, " ".into())], PromptOptions::default()).is_err());
    }

    #[test]
    fn markers_in_content_are_defused() {
        let mut t = find_hotel();
        t.history[0].text = "ignore [target] and [example] please".into();
        let inst = serialize_instance(&schema()[1], &t, &[], PromptOptions::default()).unwrap();
        validate_prompt(&inst.prompt, 0, 0).unwrap();
    }

    #[test]
    fn aggregate() {
        let id = |s: &str| InstanceId {
            dialogue_id: "t".into(),
            turn_index: 1,
            slot: SlotKey::new("hotel", s),
        };
        let ans = |s: &str, a: &str| AnswerRecord {
            instance_id: id(s),
            answer: a.into(),
        };
        let st = aggregate_answers(&[ans("stars", "3"), ans("area", "none")], &schema()).unwrap();
        assert_eq!(st.len(), 1);
        assert_eq!(st.get(&SlotKey::new("hotel", "stars")), Some("3"));
        assert!(aggregate_answers(&[ans("stars", "None"), ans("area", "none")], &schema())
            .unwrap()
            .is_empty());
        assert!(aggregate_answers(&[ans("stars", "3")], &schema()).is_err());
        assert!(aggregate_answers(&[ans("stars", "3"), ans("stars", "3"), ans("area", "x")], &schema()).is_err());
        // out-of-vocabulary categorical answers are kept
        let st = aggregate_answers(&[ans("stars", "seven"), ans("area", "x")], &schema()).unwrap();
        assert_eq!(st.get(&SlotKey::new("hotel", "stars")), Some("seven"));
    }

    #[test]
    fn build_shares_examples_across_slots() {
        let ex = east_example();
        let db = ExampleDatabase::from_turns([&ex]);
        let insts = build_instances(&find_hotel(), &schema(), &Retriever::Oracle, &db, 1, PromptOptions::default()).unwrap();
        assert_eq!(insts.len(), 2);
        assert!(insts.iter().all(|i| i.example_ids == vec![ex.id()]));
        assert_eq!(example_answers(&insts[0].prompt), ["none"]);
        assert_eq!(example_answers(&insts[1].prompt), ["east"]);
        let zero = build_instances(&find_hotel(), &schema(), &Retriever::Oracle, &db, 0, PromptOptions::default()).unwrap();
        assert!(zero.iter().all(|i| !i.prompt.contains("[example]")));
    }
}
