mod common;

use std::collections::HashSet;
use std::path::Path;

use wdsgnn::chebnet::{load_checkpoint, TrainConfig, TrainingHistory};
use wdsgnn::eval::EvalReport;
use wdsgnn::harness::{child_seed, export_plots, run_experiment, ExperimentPlan, ExperimentSummary};
use wdsgnn::network::Network;
use wdsgnn::scenegen::SceneConfig;

fn tiny_plan(ratios: Vec<f64>, placements: usize) -> ExperimentPlan {
    ExperimentPlan {
        network: common::network_path("anytown"),
        observation_ratios: ratios,
        placements_per_ratio: placements,
        topology: Some(vec![(3, 4), (2, 4)]),
        train: TrainConfig {
            max_epochs: 3,
            patience: 2,
            ..TrainConfig::default()
        },
        scenes: SceneConfig {
            n_scenes: 30,
            seed: 2,
            ..SceneConfig::default()
        },
        base_seed: 8,
        ..ExperimentPlan::default()
    }
}

#[test]
fn default_plan_has_one_hundred_runs() {
    let plan = ExperimentPlan::default();
    assert_eq!(plan.observation_ratios.len() * plan.placements_per_ratio, 100);
}

#[test]
fn child_seeds_do_not_collide() {
    let seeds: HashSet<u64> = (0..5).flat_map(|r| (0..20).map(move |p| child_seed(0, r, p))).collect();
    assert_eq!(seeds.len(), 100);
}

#[test]
fn single_run_plan_writes_checkpoint_and_report() {
    let root = tempfile::tempdir().unwrap();
    let (dir, summary) = run_experiment(&tiny_plan(vec![0.5], 1), root.path()).unwrap();
    assert_eq!(summary.runs.len(), 1);
    assert!(summary.failures.is_empty());
    let run = dir.join(&summary.runs[0].dir);
    let ckpt = load_checkpoint(&run.join("model.ckpt")).unwrap();
    let n = Network::from_inp_file(common::network_path("anytown")).unwrap().node_count();
    assert_eq!(ckpt.header.mask.observed(), n.div_ceil(2));
    let report = EvalReport::load(&run.join("report.json")).unwrap();
    assert_eq!(report.scenes.len(), 6);
    assert!(report.model.taylor.identity_residual().abs() <= 1e-10);
    let history = TrainingHistory::read_csv(&run.join("history.csv")).unwrap();
    assert_eq!(history.epochs.len(), 3);
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let parsed: ExperimentSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, summary);
}

#[test]
fn grid_summary_is_complete_and_deterministic() {
    let plan = tiny_plan(vec![0.3, 0.9], 2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (da, sa) = run_experiment(&plan, a.path()).unwrap();
    let (db, _) = run_experiment(&plan, b.path()).unwrap();
    assert_eq!(sa.runs.len() + sa.failures.len(), 4);
    assert_eq!(sa.per_ratio.len(), 2);
    let bytes = |d: &Path| std::fs::read(d.join("summary.json")).unwrap();
    assert_eq!(bytes(&da), bytes(&db));

    // rerun in place reuses the stored scenes
    let (dc, _) = run_experiment(&plan, a.path()).unwrap();
    assert_eq!(da, dc);
    assert_eq!(bytes(&da), bytes(&dc));
}

#[test]
fn export_collects_every_artifact() {
    let root = tempfile::tempdir().unwrap();
    let (dir, _) = run_experiment(&tiny_plan(vec![0.5], 1), root.path()).unwrap();
    let net = Network::from_inp_file(common::network_path("anytown")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let export = export_plots(&net, out.path(), Some(&dir), None).unwrap();
    let kinds: HashSet<&str> = export.artifacts.iter().map(|a| a.kind.as_str()).collect();
    for k in ["network", "laplacian", "taylor", "ecdf", "history"] {
        assert!(kinds.contains(k), "missing {k}");
    }
    for a in &export.artifacts {
        assert!(out.path().join(&a.path).exists(), "{}", a.path);
    }
    for scheme in ["binary", "weighted", "logarithmic"] {
        assert!(out.path().join(format!("laplacian/{scheme}.csv")).exists());
    }
    assert!(out.path().join("manifest.json").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let plan = ExperimentPlan::from_toml_file(&dir.join("anytown_plan.toml")).unwrap();
    plan.validate().unwrap();
    assert!(plan.network.exists());
    assert_eq!(plan.resolved_topology().unwrap(), wdsgnn::harness::default_topology("anytown").unwrap());
    let search = wdsgnn::harness::SearchPlan::from_toml_file(&dir.join("search.toml")).unwrap();
    assert_eq!(search.space, wdsgnn::harness::SearchSpace::default());
    assert!(search.network.exists());
    let scenes = SceneConfig::from_toml_file(&dir.join("scenes.toml")).unwrap();
    assert_eq!(scenes, SceneConfig::default());
    let text = std::fs::read_to_string(dir.join("train.toml")).unwrap();
    assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), TrainConfig::default());
}
