use std::path::PathBuf;

use cliqueparcel::backend::{
    run_plan, BackendConfig, BackendKind, CostModelParams, RecordingBackend, ReplayCache, ScriptedAnswers,
    SimulatedBackend,
};
use cliqueparcel::clique::{make_grouping, CliqueMethod};
use cliqueparcel::data::{length_dispersion_stats, load_dataset};
use cliqueparcel::experiment::{run_experiment, ExperimentConfig, ExperimentError, MethodStatus};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn config(dataset: &str) -> ExperimentConfig {
    ExperimentConfig { dataset_path: fixture(dataset), repetitions: 1, ..Default::default() }
}

#[test]
fn long_context_fixture_is_more_dispersed() {
    let squad = length_dispersion_stats(&load_dataset(fixture("squad_long.jsonl")).unwrap());
    let trec = length_dispersion_stats(&load_dataset(fixture("trec_short.jsonl")).unwrap());
    assert!(squad.rsd_percent > trec.rsd_percent);
    assert!(squad.mean_tokens > trec.mean_tokens);
}

#[test]
fn batch_size_one_matches_separate() {
    let mut c = config("trec_short.jsonl");
    c.batch_size = 1;
    let report = run_experiment(&c).unwrap();
    let sep = report.method(CliqueMethod::Separate).unwrap().clone();
    let sep_eff = sep.efficiency.unwrap();
    for r in &report.per_method {
        let e = r.efficiency.as_ref().unwrap();
        assert_eq!(r.status, MethodStatus::Ok);
        assert_eq!(e.total_time_s, sep_eff.total_time_s, "{}", r.method.tag());
        assert!((e.weighted_efficiency_e - 2.0).abs() < 1e-12);
        assert!((r.faithfulness.as_ref().unwrap().overall_dh - 2.0).abs() < 1e-9);
    }
}

#[test]
fn faithful_batching_is_efficient_and_exact() {
    let mut c = config("squad_long.jsonl");
    c.methods = vec![CliqueMethod::Random];
    c.batch_size = 8;
    let report = run_experiment(&c).unwrap();
    let rc = report.method(CliqueMethod::Random).unwrap();
    let sep = report.method(CliqueMethod::Separate).unwrap();
    assert!(rc.efficiency.as_ref().unwrap().weighted_efficiency_e > sep.efficiency.as_ref().unwrap().weighted_efficiency_e);
    let f = rc.faithfulness.as_ref().unwrap();
    assert!(f.per_item.iter().all(|i| (i.contribution - 2.0).abs() < 1e-9));
    assert_eq!(rc.accuracy, Some(1.0));
    assert!(!report.partial);
}

#[test]
fn every_prompt_scored_once_per_method() {
    let report = run_experiment(&config("trec_short.jsonl")).unwrap();
    let n = load_dataset(fixture("trec_short.jsonl")).unwrap().len();
    for r in &report.per_method {
        let mut ids: Vec<_> = r.faithfulness.as_ref().unwrap().per_item.iter().map(|i| i.prompt_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n, "{}", r.method.tag());
    }
    assert_eq!(report.per_method[0].method, CliqueMethod::Separate);
    assert_eq!(report.owa_selection.len(), 11);
}

#[test]
fn replay_reproduces_simulated_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");
    let c = ExperimentConfig { methods: vec![CliqueMethod::Random], ..config("trec_short.jsonl") };
    let workload = load_dataset(&c.dataset_path).unwrap();
    let backend_config = c.effective_backend();
    {
        let sim = SimulatedBackend::new(
            CostModelParams::default(),
            ScriptedAnswers::from_workload(&workload, backend_config.simulation.answer_words),
            backend_config.simulation,
        );
        let recorder = RecordingBackend::new(sim, ReplayCache::open(&cache_path).unwrap(), "simulated");
        for (method, l) in [(CliqueMethod::Separate, 1), (CliqueMethod::Random, c.batch_size)] {
            let plan = make_grouping(method, &workload, l, c.seed).unwrap();
            run_plan(&recorder, &workload, &plan, &backend_config).unwrap();
        }
    }
    let simulated = run_experiment(&c).unwrap();
    let mut replay_config = c.clone();
    replay_config.backend = BackendConfig {
        kind: BackendKind::Replay,
        cache_path: Some(cache_path),
        ..Default::default()
    };
    let replayed = run_experiment(&replay_config).unwrap();
    assert_eq!(replayed.per_method, simulated.per_method);
}

#[test]
fn replay_miss_fails_the_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config("trec_short.jsonl");
    c.backend = BackendConfig {
        kind: BackendKind::Replay,
        cache_path: Some(dir.path().join("empty.jsonl")),
        ..Default::default()
    };
    match run_experiment(&c) {
        Err(e @ ExperimentError::Backend(_)) => assert_eq!(e.exit_code(), 3),
        Ok(r) => assert!(r.partial),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn missing_dataset_is_a_dataset_error() {
    let err = run_experiment(&config("no_such_file.jsonl")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
