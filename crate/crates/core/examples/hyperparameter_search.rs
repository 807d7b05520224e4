//! A small random search over layer counts, filter orders, widths, weight
//! decay and edge weighting, with short trainings.

use wdsgnn::chebnet::{Samples, TrainConfig};
use wdsgnn::harness::{random_search, SearchSpace};
use wdsgnn::network::Network;
use wdsgnn::observe::generate_mask;
use wdsgnn::scenegen::{build_sceneset, SceneConfig};

fn main() -> wdsgnn::Result<()> {
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let set = build_sceneset(&net, &SceneConfig { n_scenes: 100, ..SceneConfig::default() })?;
    let mask = generate_mask(net.node_count(), 0.8, 0)?;
    let train = Samples::from_scenes(&set, &set.splits.train, &mask)?;
    let val = Samples::from_scenes(&set, &set.splits.val, &mask)?;

    // narrower than the default space to keep this quick
    let space = SearchSpace {
        n_layers: (1, 2),
        k: (3, 8),
        f: (4, 10),
        ..SearchSpace::default()
    };
    let cfg = TrainConfig {
        max_epochs: 15,
        patience: 5,
        ..TrainConfig::default()
    };
    let result = random_search(&net, &train, &val, &space, 6, 2, &cfg, 11)?;
    for e in &result.ranked {
        println!(
            "#{:<2} {:<12} {:?} wd {:.1e}  mean val {:.4e}",
            e.index, e.config.scheme, e.config.layers, e.config.weight_decay, e.mean_val_loss
        );
    }
    let dir = std::env::temp_dir().join("wdsgnn-search");
    result.save(&dir)?;
    println!("search.json and swarm.csv in {}", dir.display());
    Ok(())
}
