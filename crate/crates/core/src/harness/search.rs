//! Seeded random search over layer count, filter orders, widths, weight
//! decay and adjacency scheme. Every configuration is trained several times
//! and ranked by its mean best validation loss.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::child_seed;
use crate::chebnet::{train_samples, ChebModel, Samples, TrainConfig};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::observe::generate_mask;
use crate::scenegen::{build_sceneset, SceneConfig};
use crate::spectral::{LambdaMaxMethod, ScaledLaplacian, WeightScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub n_layers: (usize, usize),
    pub k: (usize, usize),
    pub f: (usize, usize),
    /// Sampled log-uniformly.
    pub weight_decay: (f64, f64),
    pub schemes: Vec<WeightScheme>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_layers: (2, 4),
            k: (30, 50),
            f: (30, 50),
            weight_decay: (1e-6, 1e-4),
            schemes: WeightScheme::ALL.to_vec(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ints = [("n_layers", self.n_layers), ("k", self.k), ("f", self.f)];
        for (name, (lo, hi)) in ints {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidRange {
                    name: name.into(),
                    lower: lo as f64,
                    upper: hi as f64,
                });
            }
        }
        let (lo, hi) = self.weight_decay;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidRange {
                name: "weight_decay".into(),
                lower: lo,
                upper: hi,
            });
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("search space has no scheme".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledConfig {
    pub scheme: WeightScheme,
    /// Hidden `(K, F)` layers.
    pub layers: Vec<(usize, usize)>,
    pub weight_decay: f64,
}

/// Draws one configuration with the given scheme.
pub fn sample_config(space: &SearchSpace, scheme: WeightScheme, rng: &mut impl Rng) -> SampledConfig {
    let n = rng.random_range(space.n_layers.0..=space.n_layers.1);
    let layers = (0..n)
        .map(|_| {
            (
                rng.random_range(space.k.0..=space.k.1),
                rng.random_range(space.f.0..=space.f.1),
            )
        })
        .collect();
    let (lo, hi) = space.weight_decay;
    let weight_decay = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    SampledConfig {
        scheme,
        layers,
        weight_decay,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub index: usize,
    pub config: SampledConfig,
    /// Best validation loss per repeat; failed repeats are infinite.
    pub val_losses: Vec<f64>,
    pub mean_val_loss: f64,
}

/// One training of the search, for swarm plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmRow {
    pub config_index: usize,
    pub repeat: usize,
    pub scheme: WeightScheme,
    pub n_layers: usize,
    pub weight_decay: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Sorted by ascending mean validation loss.
    pub ranked: Vec<SearchEntry>,
    pub swarm: Vec<SwarmRow>,
}

impl SearchResult {
    /// Lowest mean validation loss reached by each scheme.
    pub fn best_by_scheme(&self) -> HashMap<WeightScheme, f64> {
        let mut best = HashMap::new();
        for e in &self.ranked {
            let slot = best.entry(e.config.scheme).or_insert(f64::INFINITY);
            if e.mean_val_loss < *slot {
                *slot = e.mean_val_loss;
            }
        }
        best
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("search.json");
        // infinite losses of failed runs are written as null
        fs::write(&path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        write_swarm_csv(&dir.join("swarm.csv"), &self.swarm)
    }
}

pub fn write_swarm_csv(path: &Path, rows: &[SwarmRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Search settings as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchPlan {
    pub network: PathBuf,
    pub observation_ratio: f64,
    pub budget: usize,
    pub repeats: usize,
    pub seed: u64,
    pub space: SearchSpace,
    pub train: TrainConfig,
    pub scenes: SceneConfig,
}

impl Default for SearchPlan {
    fn default() -> Self {
        Self {
            network: PathBuf::from("anytown.inp"),
            observation_ratio: 0.8,
            budget: 20,
            repeats: 5,
            seed: 0,
            space: SearchSpace::default(),
            train: TrainConfig::default(),
            scenes: SceneConfig::default(),
        }
    }
}

impl SearchPlan {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan: Self = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if plan.network.is_relative() {
            if let Some(dir) = path.parent() {
                plan.network = dir.join(&plan.network);
            }
        }
        Ok(plan)
    }

    /// Generates the scene set and runs [`random_search`].
    pub fn run(&self) -> Result<SearchResult> {
        let net = Network::from_inp_file(&self.network)?;
        let set = build_sceneset(&net, &self.scenes)?;
        let mask = generate_mask(net.node_count(), self.observation_ratio, self.seed)?;
        let train = Samples::from_scenes(&set, &set.splits.train, &mask)?;
        let val = Samples::from_scenes(&set, &set.splits.val, &mask)?;
        random_search(&net, &train, &val, &self.space, self.budget, self.repeats, &self.train, self.seed)
    }
}

/// Samples `budget` configurations and trains each `repeats` times with
/// distinct seeds. Schemes are assigned in a shuffled round-robin so that
/// every scheme is drawn equally often; other values are independent draws.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    net: &Network,
    train: &Samples,
    val: &Samples,
    space: &SearchSpace,
    budget: usize,
    repeats: usize,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    if budget == 0 || repeats == 0 {
        return Err(Error::Config("budget and repeats must be at least 1".into()));
    }
    let mut laplacians = HashMap::new();
    for &scheme in &space.schemes {
        if let std::collections::hash_map::Entry::Vacant(e) = laplacians.entry(scheme) {
            e.insert(Arc::new(ScaledLaplacian::from_network(net, scheme, LambdaMaxMethod::Auto)?));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schemes: Vec<WeightScheme> = space.schemes.iter().copied().cycle().take(budget).collect();
    schemes.shuffle(&mut rng);
    let configs: Vec<SampledConfig> = schemes
        .into_iter()
        .map(|s| sample_config(space, s, &mut rng))
        .collect();

    let mut ranked = Vec::with_capacity(budget);
    let mut swarm = Vec::with_capacity(budget * repeats);
    for (index, config) in configs.into_iter().enumerate() {
        let mut val_losses = Vec::with_capacity(repeats);
        for repeat in 0..repeats {
            let run_seed = child_seed(seed, index, repeat);
            let cfg = TrainConfig {
                seed: run_seed,
                weight_decay: config.weight_decay,
                ..train_cfg.clone()
            };
            let loss = ChebModel::new(Arc::clone(&laplacians[&config.scheme]), &config.layers, run_seed)
                .and_then(|mut model| train_samples(&mut model, train, val, &cfg))
                .map(|o| o.best_val_loss)
                .unwrap_or_else(|e| {
                    log::warn!("search config {index} repeat {repeat} failed: {e}");
                    f64::INFINITY
                });
            log::info!(
                "config {index} ({}, {} layers) repeat {repeat}: val {loss:.4e}",
                config.scheme,
                config.layers.len()
            );
            swarm.push(SwarmRow {
                config_index: index,
                repeat,
                scheme: config.scheme,
                n_layers: config.layers.len(),
                weight_decay: config.weight_decay,
                val_loss: loss,
            });
            val_losses.push(loss);
        }
        let mean_val_loss = val_losses.iter().sum::<f64>() / repeats as f64;
        ranked.push(SearchEntry {
            index,
            config,
            val_losses,
            mean_val_loss,
        });
    }
    ranked.sort_by(|a, b| a.mean_val_loss.total_cmp(&b.mean_val_loss).then(a.index.cmp(&b.index)));
    Ok(SearchResult { ranked, swarm })
}
