//! Trains the default Anytown model at 80 % observation and compares it with
//! the naive baseline. Pass an epoch limit to shorten the run:
//!
//!     cargo run --release --example train_anytown -- 100

use std::sync::Arc;

use wdsgnn::chebnet::{train, ChebModel, TrainConfig};
use wdsgnn::eval::evaluate;
use wdsgnn::harness::default_topology;
use wdsgnn::network::Network;
use wdsgnn::observe::generate_mask;
use wdsgnn::scenegen::{build_sceneset, SceneConfig};
use wdsgnn::spectral::{LambdaMaxMethod, ScaledLaplacian, WeightScheme};

fn main() -> wdsgnn::Result<()> {
    let max_epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let set = build_sceneset(&net, &SceneConfig::default())?;
    let lap = Arc::new(ScaledLaplacian::from_network(&net, WeightScheme::Binary, LambdaMaxMethod::Auto)?);
    let mut model = ChebModel::new(lap, &default_topology("anytown")?, 1)?;
    let mask = generate_mask(net.node_count(), 0.8, 3)?;
    let cfg = TrainConfig {
        max_epochs,
        patience: 50.min(max_epochs - 1).max(1),
        ..TrainConfig::default()
    };

    let outcome = train(&mut model, &set, &mask, &cfg)?;
    for e in outcome.history.epochs.iter().step_by(20) {
        println!("epoch {:4}  train {:.3e}  val {:.3e}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("best epoch {} of {}", outcome.best_epoch, outcome.history.epochs.len());

    let report = evaluate(&model, &set, &mask)?;
    println!(
        "test mean relative error: model {:.4}, naive {:.4}",
        report.model.mean_relative_error, report.baseline.mean_relative_error
    );
    Ok(())
}
