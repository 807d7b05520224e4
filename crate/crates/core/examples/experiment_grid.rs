//! A small observation-ratio x placement grid with short trainings. The
//! plan is printed as TOML, the format `wdsgnn experiment --plan` reads.

use wdsgnn::chebnet::TrainConfig;
use wdsgnn::harness::{run_experiment, ExperimentPlan};
use wdsgnn::scenegen::SceneConfig;

fn main() -> wdsgnn::Result<()> {
    let plan = ExperimentPlan {
        network: concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp").into(),
        observation_ratios: vec![0.2, 0.8],
        placements_per_ratio: 2,
        topology: Some(vec![(8, 10), (8, 10)]),
        train: TrainConfig {
            max_epochs: 150,
            patience: 20,
            ..TrainConfig::default()
        },
        scenes: SceneConfig {
            n_scenes: 200,
            ..SceneConfig::default()
        },
        ..ExperimentPlan::default()
    };
    print!("{}", plan.to_toml());

    let root = std::env::temp_dir().join("wdsgnn-artifacts");
    let (dir, summary) = run_experiment(&plan, &root)?;
    for r in &summary.per_ratio {
        if let (Some(m), Some(b)) = (r.taylor, r.baseline_taylor) {
            println!(
                "ratio {:.1}: cRMSE {:.3} (naive {:.3}), corr {:.4} (naive {:.4})",
                r.observation_ratio, m.centered_rmse, b.centered_rmse, m.correlation, b.correlation
            );
        }
    }
    println!("{}", dir.display());
    Ok(())
}
