//! Metrics of the naive mean-of-observed baseline over a range of
//! observation ratios, with no model involved.

use wdsgnn::eval::metrics;
use wdsgnn::network::Network;
use wdsgnn::observe::{generate_mask, naive_predict};
use wdsgnn::scenegen::{build_sceneset, SceneConfig};

fn main() -> wdsgnn::Result<()> {
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let set = build_sceneset(&net, &SceneConfig { n_scenes: 300, ..SceneConfig::default() })?;
    let truth: Vec<Vec<f64>> = set.rows(&set.splits.test).map(<[f64]>::to_vec).collect();

    println!("ratio  observed  mean rel.err  norm.std  corr    cRMSE");
    for ratio in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let mask = generate_mask(net.node_count(), ratio, 7)?;
        let pred = truth
            .iter()
            .map(|t| naive_predict(t, &mask))
            .collect::<wdsgnn::Result<Vec<_>>>()?;
        let m = metrics(&pred, &truth)?;
        println!(
            "{ratio:5.2}  {:8}  {:12.4}  {:8.4}  {:6.4}  {:.4}",
            mask.observed(),
            m.mean_relative_error,
            m.taylor.normalized_std,
            m.taylor.correlation,
            m.taylor.centered_rmse
        );
    }
    Ok(())
}
