//! Experiment orchestration: the observation-ratio x placement grid, the
//! hyperparameter random search and exports for external plotting.

mod export;
mod search;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chebnet::{save_checkpoint, train, ChebModel, CheckpointHeader, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, TaylorStats};
use crate::network::Network;
use crate::observe::generate_mask;
use crate::scenegen::{build_sceneset, SceneConfig, SceneSet};
use crate::spectral::{LambdaMaxMethod, ScaledLaplacian, WeightScheme};

pub use export::{export_plots, PlotArtifact, PlotExport};
pub use search::{
    random_search, sample_config, write_swarm_csv, SampledConfig, SearchEntry, SearchPlan, SearchResult,
    SearchSpace, SwarmRow,
};

/// Environment variable naming the artifact root directory.
pub const ARTIFACTS_ENV: &str = "WDSGNN_ARTIFACTS";
pub const DEFAULT_OBSERVATION_RATIOS: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];
pub const DEFAULT_PLACEMENTS: usize = 20;

pub fn artifact_root() -> PathBuf {
    std::env::var_os(ARTIFACTS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("artifacts"))
}

/// Hidden-layer `(K, F)` pairs tuned for the benchmark networks.
pub fn default_topology(network_name: &str) -> Result<Vec<(usize, usize)>> {
    let key: String = network_name
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    match key.as_str() {
        "anytown" => Ok(vec![(39, 14), (43, 20), (45, 27)]),
        "ctown" => Ok(vec![(200, 60), (200, 60), (20, 30)]),
        "richmond" => Ok(vec![(240, 120), (120, 60), (20, 30)]),
        _ => Err(Error::UnknownNetwork(network_name.to_string())),
    }
}

/// Parses `"39:14,43:20,45:27"` into `(K, F)` pairs.
pub fn parse_topology(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|layer| {
            let (k, f) = layer
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("layer '{layer}' is not K:F")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| Error::Config(format!("bad layer size '{v}'")))
            };
            Ok((parse(k)?, parse(f)?))
        })
        .collect()
}

/// Warns when the stacked filters cannot reach across the graph.
pub fn check_receptive_field(topology: &[(usize, usize)], diameter: usize) -> bool {
    let reach: usize = topology.iter().map(|(k, _)| k - 1).sum();
    if reach < diameter {
        log::warn!("filters reach {reach} hops, below the graph diameter {diameter}");
        false
    } else {
        true
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one grid run. splitmix64 is a bijection, so distinct
/// `(ratio, placement)` pairs below 2^32 never collide.
pub fn child_seed(base_seed: u64, ratio_index: usize, placement: usize) -> u64 {
    splitmix64(
        base_seed
            .wrapping_add((ratio_index as u64) << 32)
            .wrapping_add(placement as u64),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Network name used for default topologies: the file stem.
pub fn network_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub network: PathBuf,
    pub scheme: WeightScheme,
    pub observation_ratios: Vec<f64>,
    pub placements_per_ratio: usize,
    /// Hidden `(K, F)` layers; `None` uses [`default_topology`] of the file stem.
    pub topology: Option<Vec<(usize, usize)>>,
    pub train: TrainConfig,
    pub scenes: SceneConfig,
    pub base_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            network: PathBuf::from("anytown.inp"),
            scheme: WeightScheme::Binary,
            observation_ratios: DEFAULT_OBSERVATION_RATIOS.to_vec(),
            placements_per_ratio: DEFAULT_PLACEMENTS,
            topology: None,
            train: TrainConfig::default(),
            scenes: SceneConfig::default(),
            base_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = Self::from_toml(&text)?;
        // network paths are relative to the plan file
        if plan.network.is_relative() {
            if let Some(dir) = path.parent() {
                plan.network = dir.join(&plan.network);
            }
        }
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation_ratios.is_empty() {
            return Err(Error::Config("plan has no observation ratios".into()));
        }
        if let Some(r) = self.observation_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::InvalidRatio(*r));
        }
        if self.placements_per_ratio == 0 {
            return Err(Error::Config("placements_per_ratio must be at least 1".into()));
        }
        self.train.validate()
    }

    pub fn resolved_topology(&self) -> Result<Vec<(usize, usize)>> {
        match &self.topology {
            Some(t) if !t.is_empty() => Ok(t.clone()),
            Some(_) => Err(Error::Config("empty topology".into())),
            None => default_topology(&network_name(&self.network)),
        }
    }

    /// Content hash of the plan and the network file.
    pub fn fingerprint(&self, network_text: &str) -> String {
        let mut plan = self.clone();
        plan.network = PathBuf::from(network_name(&self.network));
        let mut bytes = plan.to_toml().into_bytes();
        bytes.extend_from_slice(network_text.as_bytes());
        sha256_hex(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ratio_index: usize,
    pub placement: usize,
    pub observation_ratio: f64,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub mean_relative_error: f64,
    pub baseline_mean_relative_error: f64,
    pub taylor: TaylorStats,
    pub baseline_taylor: TaylorStats,
    /// Run directory relative to the experiment directory.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub ratio_index: usize,
    pub placement: usize,
    pub seed: u64,
    pub reason: String,
}

/// Placement-averaged Taylor statistics for one observation ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub observation_ratio: f64,
    pub runs: usize,
    pub taylor: Option<TaylorStats>,
    pub baseline_taylor: Option<TaylorStats>,
    pub mean_relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub fingerprint: String,
    pub network: String,
    pub scheme: WeightScheme,
    pub topology: Vec<(usize, usize)>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub per_ratio: Vec<RatioSummary>,
}

fn mean_taylor<'a>(stats: impl Iterator<Item = &'a TaylorStats>) -> Option<TaylorStats> {
    let v: Vec<&TaylorStats> = stats.collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    Some(TaylorStats {
        normalized_std: v.iter().map(|s| s.normalized_std).sum::<f64>() / n,
        correlation: v.iter().map(|s| s.correlation).sum::<f64>() / n,
        centered_rmse: v.iter().map(|s| s.centered_rmse).sum::<f64>() / n,
    })
}

/// Trains one placement and writes checkpoint, history and report to `dir`.
#[allow(clippy::too_many_arguments)]
pub fn run_single(
    net_path: Option<&Path>,
    network_sha256: Option<String>,
    set: &SceneSet,
    laplacian: Arc<ScaledLaplacian>,
    topology: &[(usize, usize)],
    ratio: f64,
    seed: u64,
    train_cfg: &TrainConfig,
    dir: &Path,
) -> Result<(crate::chebnet::TrainOutcome, crate::eval::EvalReport)> {
    let mask = generate_mask(set.node_count(), ratio, seed)?;
    let mut model = ChebModel::new(Arc::clone(&laplacian), topology, seed)?;
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    let outcome = train(&mut model, set, &mask, &cfg)?;
    let report = evaluate(&model, set, &mask)?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = CheckpointHeader {
        layers: model.shapes(),
        topology: topology.to_vec(),
        scheme: laplacian.scheme(),
        lambda_max: laplacian.lambda_max(),
        scaler: set.scaler,
        mask,
        train_config: cfg,
        seed,
        network_path: net_path.map(|p| p.display().to_string()),
        network_sha256,
    };
    save_checkpoint(&dir.join("model.ckpt"), &header, &model)?;
    outcome.history.write_csv(&dir.join("history.csv"))?;
    report.save(&dir.join("report.json"))?;
    Ok((outcome, report))
}

/// Runs the full grid under `root/<fingerprint>` and writes `summary.json`.
/// Failed runs are recorded and the grid continues.
pub fn run_experiment(plan: &ExperimentPlan, root: &Path) -> Result<(PathBuf, ExperimentSummary)> {
    plan.validate()?;
    let text = fs::read_to_string(&plan.network).map_err(|e| Error::io(&plan.network, e))?;
    let net = crate::network::parse_inp(&text)?;
    let topology = plan.resolved_topology()?;
    check_receptive_field(&topology, net.graph_diameter());

    let fingerprint = plan.fingerprint(&text);
    let dir = root.join(&fingerprint[..16]);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    fs::write(dir.join("plan.toml"), plan.to_toml()).map_err(|e| Error::io(&dir, e))?;

    let scenes_dir = dir.join("scenes");
    let set = if scenes_dir.join(crate::scenegen::SPLITS_FILE).exists() {
        SceneSet::load(&scenes_dir)?
    } else {
        let set = build_sceneset(&net, &plan.scenes)?;
        set.save(&scenes_dir)?;
        set
    };
    let laplacian = Arc::new(ScaledLaplacian::from_network(
        &net,
        plan.scheme,
        LambdaMaxMethod::Auto,
    )?);
    let net_sha = sha256_hex(text.as_bytes());

    let jobs: Vec<(usize, usize, f64)> = plan
        .observation_ratios
        .iter()
        .enumerate()
        .flat_map(|(ri, &r)| (0..plan.placements_per_ratio).map(move |pi| (ri, pi, r)))
        .collect();
    let results: Vec<std::result::Result<RunRecord, RunFailure>> = jobs
        .par_iter()
        .map(|&(ri, pi, ratio)| {
            let seed = child_seed(plan.base_seed, ri, pi);
            let rel = format!("runs/r{ri:02}_p{pi:03}");
            log::info!("run ratio {ratio} placement {pi} (seed {seed})");
            run_single(
                Some(&plan.network),
                Some(net_sha.clone()),
                &set,
                Arc::clone(&laplacian),
                &topology,
                ratio,
                seed,
                &plan.train,
                &dir.join(&rel),
            )
            .map(|(outcome, report)| RunRecord {
                ratio_index: ri,
                placement: pi,
                observation_ratio: ratio,
                seed,
                epochs: outcome.history.epochs.len(),
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.best_val_loss,
                mean_relative_error: report.model.mean_relative_error,
                baseline_mean_relative_error: report.baseline.mean_relative_error,
                taylor: report.model.taylor,
                baseline_taylor: report.baseline.taylor,
                dir: rel,
            })
            .map_err(|e| {
                log::warn!("run ratio {ratio} placement {pi} failed: {e}");
                RunFailure {
                    ratio_index: ri,
                    placement: pi,
                    seed,
                    reason: e.to_string(),
                }
            })
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(f) => failures.push(f),
        }
    }
    let per_ratio = plan
        .observation_ratios
        .iter()
        .enumerate()
        .map(|(ri, &ratio)| {
            let these: Vec<&RunRecord> = runs.iter().filter(|r| r.ratio_index == ri).collect();
            RatioSummary {
                observation_ratio: ratio,
                runs: these.len(),
                taylor: mean_taylor(these.iter().map(|r| &r.taylor)),
                baseline_taylor: mean_taylor(these.iter().map(|r| &r.baseline_taylor)),
                mean_relative_error: (!these.is_empty()).then(|| {
                    these.iter().map(|r| r.mean_relative_error).sum::<f64>() / these.len() as f64
                }),
            }
        })
        .collect();
    let summary = ExperimentSummary {
        fingerprint,
        network: network_name(&plan.network),
        scheme: plan.scheme,
        topology,
        runs,
        failures,
        per_ratio,
    };
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_vec_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok((dir, summary))
}

/// Loads a network and reports diameter coverage for a topology.
pub fn receptive_field_ok(net: &Network, topology: &[(usize, usize)]) -> bool {
    check_receptive_field(topology, net.graph_diameter())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topologies() {
        assert_eq!(default_topology("anytown").unwrap(), vec![(39, 14), (43, 20), (45, 27)]);
        assert_eq!(default_topology("C-Town").unwrap(), vec![(200, 60), (200, 60), (20, 30)]);
        assert_eq!(default_topology("Richmond").unwrap(), vec![(240, 120), (120, 60), (20, 30)]);
        assert!(matches!(default_topology("net3"), Err(Error::UnknownNetwork(_))));
    }

    #[test]
    fn topology_strings() {
        assert_eq!(parse_topology("39:14, 43:20,45:27").unwrap(), vec![(39, 14), (43, 20), (45, 27)]);
        assert!(parse_topology("39").is_err());
        assert!(parse_topology("0:3").is_err());
    }

    #[test]
    fn child_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for ri in 0..5 {
            for pi in 0..20 {
                assert!(seen.insert(child_seed(7, ri, pi)));
            }
        }
        assert_eq!(child_seed(7, 1, 2), child_seed(7, 1, 2));
    }

    #[test]
    fn receptive_field_warning() {
        assert!(check_receptive_field(&[(39, 14), (43, 20), (45, 27)], 5));
        assert!(!check_receptive_field(&[(2, 4), (2, 4)], 5));
    }

    #[test]
    fn plan_toml_defaults() {
        let plan = ExperimentPlan::from_toml("network = \"anytown.inp\"\nbase_seed = 3\n").unwrap();
        assert_eq!(plan.observation_ratios, DEFAULT_OBSERVATION_RATIOS.to_vec());
        assert_eq!(plan.placements_per_ratio, 20);
        assert_eq!(plan.resolved_topology().unwrap(), default_topology("anytown").unwrap());
        assert_eq!(ExperimentPlan::from_toml(&plan.to_toml()).unwrap(), plan);
        let bad = ExperimentPlan {
            observation_ratios: vec![0.0],
            ..plan
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidRatio(_))));
    }
}
