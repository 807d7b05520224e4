//! Samples and solves a scene set, then saves it with its splits and scaler.

use wdsgnn::network::Network;
use wdsgnn::scenegen::{build_sceneset, SceneConfig, SceneSet};

fn main() -> wdsgnn::Result<()> {
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let cfg = SceneConfig {
        n_scenes: 200,
        seed: 42,
        ..SceneConfig::default()
    };
    print!("{}", cfg.to_toml());

    let set = build_sceneset(&net, &cfg)?;
    println!(
        "{} scenes, {} failed; splits {}/{}/{}",
        set.len(),
        set.failures.len(),
        set.splits.train.len(),
        set.splits.val.len(),
        set.splits.test.len()
    );
    let s = set.scaler;
    println!("training pressures: mean {:.2} std {:.2} range [{:.2}, {:.2}] ft", s.mean, s.std, s.min, s.max);

    let dir = std::env::temp_dir().join("wdsgnn-scenes");
    set.save(&dir)?;
    let back = SceneSet::load(&dir)?;
    assert_eq!(back.pressures, set.pressures);
    println!("saved to {}", dir.display());
    Ok(())
}
