//! The answerer seam: anything that turns an instance file into an answer file.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::harness::config::AnswererConfig;
use crate::jsonl;
use crate::promptgen::{example_answers, AnswerRecord, InstanceId, QAInstance};

/// Answers with the value of the first `[example]` block.
pub fn answerer_copy_example(instance: &QAInstance) -> Result<AnswerRecord> {
    if instance.k == 0 {
        return Err(Error::Answerer(format!(
            "copy_example needs at least one example, {} has none",
            instance.instance_id
        )));
    }
    let answer = example_answers(&instance.prompt)
        .into_iter()
        .next()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::Answerer(format!("no example answer in {}", instance.instance_id)))?;
    Ok(AnswerRecord {
        instance_id: instance.instance_id.clone(),
        answer,
    })
}

/// Checks that `answers` cover exactly the instance ids and returns them in instance order.
pub fn validate_answers(instances: &[QAInstance], answers: Vec<AnswerRecord>) -> Result<Vec<AnswerRecord>> {
    fn echo(ids: &[&InstanceId]) -> String {
        let mut s: Vec<String> = ids.iter().take(10).map(|i| i.to_string()).collect();
        if ids.len() > 10 {
            s.push(format!("... {} more", ids.len() - 10));
        }
        s.join(", ")
    }

    let expected: HashSet<&InstanceId> = instances.iter().map(|i| &i.instance_id).collect();
    let mut by_id: HashMap<InstanceId, AnswerRecord> = HashMap::with_capacity(answers.len());
    let mut duplicates = Vec::new();
    let mut unknown = Vec::new();
    let mut empty = Vec::new();
    for a in answers {
        if !expected.contains(&a.instance_id) {
            unknown.push(a.instance_id.clone());
            continue;
        }
        if a.answer.trim().is_empty() {
            empty.push(a.instance_id.clone());
        }
        let id = a.instance_id.clone();
        if by_id.insert(id.clone(), a).is_some() {
            duplicates.push(id);
        }
    }
    let missing: Vec<&InstanceId> = instances
        .iter()
        .map(|i| &i.instance_id)
        .filter(|id| !by_id.contains_key(*id))
        .collect();

    let mut problems = Vec::new();
    if !missing.is_empty() {
        problems.push(format!("missing answers for {}", echo(&missing)));
    }
    for (label, ids) in [("unknown", &unknown), ("duplicate", &duplicates), ("empty", &empty)] {
        if !ids.is_empty() {
            let refs: Vec<&InstanceId> = ids.iter().collect();
            problems.push(format!("{label} answers for {}", echo(&refs)));
        }
    }
    if !problems.is_empty() {
        return Err(Error::AnswerValidation(problems.join("; ")));
    }
    Ok(instances
        .iter()
        .map(|i| by_id.remove(&i.instance_id).expect("checked"))
        .collect())
}

/// Produces answers for an instance file that has already been written to `instance_path`.
///
/// `relative` is the instance file's path relative to the run directory, used by
/// the `files` answerer to locate precomputed answers.
pub fn collect_answers(
    config: &AnswererConfig,
    instances: &[QAInstance],
    instance_path: &Path,
    answer_path: &Path,
    relative: &Path,
) -> Result<Vec<AnswerRecord>> {
    let answers = match config {
        AnswererConfig::Gold => instances
            .iter()
            .map(|i| AnswerRecord {
                instance_id: i.instance_id.clone(),
                answer: i.gold_answer.clone(),
            })
            .collect(),
        AnswererConfig::None => instances
            .iter()
            .map(|i| AnswerRecord {
                instance_id: i.instance_id.clone(),
                answer: crate::text::NONE_ANSWER.to_string(),
            })
            .collect(),
        AnswererConfig::CopyExample => instances.iter().map(answerer_copy_example).collect::<Result<_>>()?,
        AnswererConfig::External { command, timeout_secs } => {
            run_external(command, instance_path, answer_path, Duration::from_secs(*timeout_secs))?;
            read_answers(answer_path)?
        }
        AnswererConfig::Files { dir } => read_answers(&dir.join(answer_file_name(relative)))?,
    };
    validate_answers(instances, answers)
}

/// `stage01/test_hotel.instances.jsonl` -> `stage01/test_hotel.answers.jsonl`
pub fn answer_file_name(instance_file: &Path) -> std::path::PathBuf {
    let name = instance_file
        .file_name()
        .map(|n| n.to_string_lossy().replace(".instances.jsonl", ".answers.jsonl"))
        .unwrap_or_else(|| "answers.jsonl".into());
    instance_file.with_file_name(name)
}

fn read_answers(path: &Path) -> Result<Vec<AnswerRecord>> {
    if !path.exists() {
        return Err(Error::Answerer(format!("answer file {} was not produced", path.display())));
    }
    jsonl::read(path).map_err(|e| match e {
        Error::Parse { path, line, message } => {
            Error::AnswerValidation(format!("{}:{line}: {message}", path.display()))
        }
        other => other,
    })
}

fn run_external(command: &[String], input: &Path, output: &Path, timeout: Duration) -> Result<()> {
    let sub = |s: &String| {
        s.replace("{input}", &input.to_string_lossy())
            .replace("{output}", &output.to_string_lossy())
    };
    let (program, args) = command.split_first().ok_or_else(|| Error::Config("empty answerer command".into()))?;
    if output.exists() {
        std::fs::remove_file(output).map_err(|e| Error::io(output, e))?;
    }
    let mut child = Command::new(sub(program))
        .args(args.iter().map(sub))
        .env("SLOTQA_INSTANCES", input)
        .env("SLOTQA_ANSWERS", output)
        .stdin(Stdio::null())
        .spawn()
        .map_err(|e| Error::Answerer(format!("cannot start {program:?}: {e}")))?;
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(status)) if status.success() => return Ok(()),
            Ok(Some(status)) => return Err(Error::Answerer(format!("{program:?} exited with {status}"))),
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::AnswererTimeout(timeout));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(20)),
            Err(e) => return Err(Error::Answerer(e.to_string())),
        }
    }
}
