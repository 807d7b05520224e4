//! Runs a one-placement experiment and gathers everything a plotting script
//! needs (network, Laplacians, reports, histories) into one directory.

use wdsgnn::chebnet::TrainConfig;
use wdsgnn::harness::{export_plots, run_experiment, ExperimentPlan};
use wdsgnn::network::Network;
use wdsgnn::scenegen::SceneConfig;

fn main() -> wdsgnn::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp");
    let plan = ExperimentPlan {
        network: path.into(),
        observation_ratios: vec![0.5],
        placements_per_ratio: 1,
        topology: Some(vec![(4, 6)]),
        train: TrainConfig {
            max_epochs: 10,
            patience: 5,
            ..TrainConfig::default()
        },
        scenes: SceneConfig {
            n_scenes: 60,
            ..SceneConfig::default()
        },
        ..ExperimentPlan::default()
    };
    let tmp = std::env::temp_dir();
    let (dir, _) = run_experiment(&plan, &tmp.join("wdsgnn-artifacts"))?;

    let out = tmp.join("wdsgnn-plots");
    let export = export_plots(&Network::from_inp_file(path)?, &out, Some(&dir), None)?;
    for a in &export.artifacts {
        println!("{:<10} {}", a.kind, a.path);
    }
    Ok(())
}
