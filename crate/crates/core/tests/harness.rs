use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use slotqa::corpus::Split;
use slotqa::harness::{run_with_inputs, AnswererConfig, ManifestSource, RetrieverConfig, RunConfig, RunInputs};
use slotqa::jsonl;
use slotqa::memory::{MemoryBudget, SamplingStrategy};
use slotqa::promptgen::QAInstance;
use slotqa::synthetic::{generate, SyntheticConfig};
use slotqa::Error;

fn inputs() -> RunInputs {
    RunInputs::from_corpora(generate(&SyntheticConfig::default()).unwrap().corpora)
}

fn config(out: &Path) -> RunConfig {
    let text = r#"
schema = "unused"
out_dir = "out"
orderings = [["hotel", "restaurant", "flight"]]
[domains]
hotel = "unused"
restaurant = "unused"
flight = "unused"
"#;
    RunConfig::from_toml(text, out).unwrap()
}

#[test]
fn files_answerer_replays_a_previous_run() {
    let dir = tempfile::tempdir().unwrap();
    let inp = inputs();
    let gold = config(dir.path());
    run_with_inputs(&gold, &inp).unwrap();

    let mut replay = config(dir.path());
    replay.out_dir = dir.path().join("replay");
    replay.answerer = AnswererConfig::Files { dir: gold.out_dir.clone() };
    let out = run_with_inputs(&replay, &inp).unwrap();
    assert_eq!(out.report.avg_jga.mean, 1.0);
}

#[test]
fn external_answerer_contract() {
    let dir = tempfile::tempdir().unwrap();
    let inp = inputs();
    let gold = config(dir.path());
    run_with_inputs(&gold, &inp).unwrap();

    // The external command finds the gold run's answer file for the instance file it is given.
    let mut ext = config(dir.path());
    ext.out_dir = dir.path().join("ext");
    let script = format!(
        "src=$(echo \"$1\" | sed -e 's#^{}#{}#' -e 's#instances#answers#'); cp \"$src\" \"$2\"",
        ext.out_dir.display(),
        gold.out_dir.display()
    );
    ext.answerer = AnswererConfig::External {
        command: vec!["sh".into(), "-c".into(), script, "answerer".into(), "{input}".into(), "{output}".into()],
        timeout_secs: 60,
    };
    let out = run_with_inputs(&ext, &inp).unwrap();
    assert_eq!(out.report.avg_jga.mean, 1.0);
    assert_eq!(out.report.fwt.unwrap().mean, 1.0);

    // An answer file missing lines is rejected with the missing ids echoed.
    ext.out_dir = dir.path().join("partial");
    ext.answerer = AnswererConfig::External {
        command: vec!["sh".into(), "-c".into(), "head -n 1 \"$SLOTQA_INSTANCES\" > /dev/null; : > \"$SLOTQA_ANSWERS\"".into()],
        timeout_secs: 60,
    };
    match run_with_inputs(&ext, &inp) {
        Err(Error::AnswerValidation(msg)) => assert!(msg.contains("missing answers for hotel-test-000:1:hotel-"), "{msg}"),
        other => panic!("{other:?}"),
    }

    ext.answerer = AnswererConfig::External {
        command: vec!["sh".into(), "-c".into(), "echo 'not json' > \"$SLOTQA_ANSWERS\"".into()],
        timeout_secs: 60,
    };
    assert!(matches!(run_with_inputs(&ext, &inp), Err(Error::AnswerValidation(_))));

    ext.answerer = AnswererConfig::External {
        command: vec!["sleep".into(), "10".into()],
        timeout_secs: 0,
    };
    let err = run_with_inputs(&ext, &inp).unwrap_err();
    assert!(matches!(err, Error::AnswererTimeout(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn examples_come_only_from_learned_services() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.k = 2;
    cfg.full_upper_triangle = true;
    cfg.retriever = RetrieverConfig {
        test: "random".into(),
        ..RetrieverConfig::default()
    };
    let inp = inputs();
    let out = run_with_inputs(&cfg, &inp).unwrap();
    let order = &cfg.orderings[0];
    let train_ids = |d: &str| -> BTreeSet<String> {
        inp.corpora[d].dialogues(Split::Train).iter().map(|x| x.dialogue_id.clone()).collect()
    };
    for stage in &out.stages {
        let mut allowed = BTreeSet::new();
        for d in &order[..stage.stage] {
            allowed.extend(train_ids(d));
        }
        for f in &stage.instance_files {
            let insts: Vec<QAInstance> = jsonl::read(f).unwrap();
            for i in insts {
                for e in &i.example_ids {
                    assert!(allowed.contains(&e.dialogue_id), "stage {}: {} uses {}", stage.stage, i.instance_id, e);
                }
            }
        }
        assert_eq!(stage.jga.len(), 3);
    }
}

#[test]
fn manifest_file_tags_memory_by_origin() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.memory = MemoryBudget {
        m: 50,
        strategy: SamplingStrategy::Turn,
        seed: 42,
        turns_per_dialogue_estimate: 10,
    };
    let out = run_with_inputs(&cfg, &inputs()).unwrap();
    let third: Vec<slotqa::harness::ManifestEntry> = jsonl::read(&out.stages[2].manifest).unwrap();
    for origin in ["hotel", "restaurant"] {
        let n = third.iter().filter(|e| e.origin == origin && e.source == ManifestSource::Memory).count();
        assert_eq!(n, 50);
    }
    assert!(third.iter().filter(|e| e.origin == "flight").all(|e| e.source == ManifestSource::Current));
    let first: Vec<slotqa::harness::ManifestEntry> = jsonl::read(&out.stages[0].manifest).unwrap();
    assert!(first.iter().all(|e| e.origin == "hotel"));
}

#[test]
fn dev_instances_use_dev_knobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.dev_k = Some(3);
    let out = run_with_inputs(&cfg, &inputs()).unwrap();
    let dev: PathBuf = out.stages[0].instance_files.iter().find(|p| p.to_string_lossy().contains("dev_")).unwrap().clone();
    let insts: Vec<QAInstance> = jsonl::read(dev).unwrap();
    assert!(insts.iter().all(|i| i.k == 3 && i.instance_id.slot.domain == "hotel"));
}

#[test]
fn missing_corpus_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let err = slotqa::harness::run_cl(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}
