//! Randomized demand and pump-speed scenes, their hydraulic solutions, the
//! train/validation/test split and the pressure scalers.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::hydraulics::{
    batch_solve, read_scene_file, write_scene_file, BoundaryConditions, SceneFailure, SceneFileMeta,
    SolverOptions,
};
use crate::network::Network;

pub const SPLITS_FILE: &str = "splits.json";
pub const TRAIN_FRACTION: f64 = 0.6;
pub const VAL_FRACTION: f64 = 0.2;
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    /// Quantile for `u` in `[0, 1)`; a zero `std` collapses to the mean.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.std == 0.0 || self.lower == self.upper {
            return self.mean.clamp(self.lower, self.upper);
        }
        let unit = Normal::standard();
        let a = unit.cdf((self.lower - self.mean) / self.std);
        let b = unit.cdf((self.upper - self.mean) / self.std);
        let x = self.mean + self.std * unit.inverse_cdf(a + u * (b - a));
        x.clamp(self.lower, self.upper)
    }

    fn validate(&self, name: &str) -> Result<()> {
        check_range(name, self.lower, self.upper)?;
        if !(self.std >= 0.0) || !self.mean.is_finite() {
            return Err(Error::Config(format!("{name}: std must be >= 0 and mean finite")));
        }
        if self.std == 0.0 && !(self.lower..=self.upper).contains(&self.mean) {
            return Err(Error::Config(format!("{name}: mean outside the truncation range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lower: f64,
    pub upper: f64,
}

impl UniformRange {
    pub fn at(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }
}

fn check_range(name: &str, lower: f64, upper: f64) -> Result<()> {
    // lower == upper is a deliberate degenerate (constant) distribution
    if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
        return Err(Error::InvalidRange {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}

/// Scene distribution. The defaults are assumptions, not published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_scenes: usize,
    pub demand_multiplier: TruncatedNormal,
    pub daynight_factor: UniformRange,
    /// Per-pump speed range; `None` uses each pump's declared bounds.
    pub pump_speed_range: Option<Vec<(f64, f64)>>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_scenes: 1000,
            demand_multiplier: TruncatedNormal {
                mean: 1.0,
                std: 0.33,
                lower: 0.1,
                upper: 2.5,
            },
            daynight_factor: UniformRange {
                lower: 0.3,
                upper: 1.1,
            },
            pump_speed_range: None,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }

    fn speed_ranges(&self, net: &Network) -> Result<Vec<UniformRange>> {
        let ranges: Vec<(f64, f64)> = match &self.pump_speed_range {
            Some(r) => {
                if r.len() != net.pumps.len() {
                    return Err(Error::dims(
                        format!("{} pump speed ranges", net.pumps.len()),
                        r.len(),
                    ));
                }
                r.clone()
            }
            None => net.pumps.iter().map(|p| p.speed_bounds).collect(),
        };
        ranges
            .into_iter()
            .zip(&net.pumps)
            .map(|((lower, upper), pump)| {
                check_range(&format!("pump_speed_range[{}]", pump.name), lower, upper)?;
                Ok(UniformRange { lower, upper })
            })
            .collect()
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::Config("n_scenes must be at least 1".into()));
        }
        self.demand_multiplier.validate("demand_multiplier")?;
        check_range("daynight_factor", self.daynight_factor.lower, self.daynight_factor.upper)?;
        if self.daynight_factor.lower < 0.0 {
            return Err(Error::InvalidRange {
                name: "daynight_factor".into(),
                lower: self.daynight_factor.lower,
                upper: self.daynight_factor.upper,
            });
        }
        self.speed_ranges(net)?;
        Ok(())
    }
}

/// `n` Latin-hypercube samples in `[0, 1)^dims`, one row per sample.
pub fn latin_hypercube(n: usize, dims: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        strata.shuffle(rng);
        for (row, &s) in out.iter_mut().zip(&strata) {
            row[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

/// Draws `cfg.n_scenes` boundary conditions.
///
/// Each scene takes one day-night factor, one multiplier per junction and one
/// speed per pump from a shared Latin hypercube. Nodal demands are
/// `base * multiplier`, then rescaled so that their total equals
/// `day-night factor * base total`.
pub fn sample_boundaries(net: &Network, cfg: &SceneConfig) -> Result<Vec<BoundaryConditions>> {
    cfg.validate(net)?;
    let speeds = cfg.speed_ranges(net)?;
    let nj = net.junction_count();
    let base: Vec<f64> = net.junctions.iter().map(|j| j.base_demand).collect();
    let base_total: f64 = base.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lhs = latin_hypercube(cfg.n_scenes, 1 + nj + speeds.len(), &mut rng);
    Ok(lhs
        .iter()
        .map(|u| {
            let factor = cfg.daynight_factor.at(u[0]);
            let mut demands: Vec<f64> = base
                .iter()
                .zip(&u[1..=nj])
                .map(|(b, &v)| b * cfg.demand_multiplier.quantile(v))
                .collect();
            let total: f64 = demands.iter().sum();
            if total > 0.0 {
                let scale = factor * base_total / total;
                demands.iter_mut().for_each(|d| *d *= scale);
            }
            let pump_speeds = speeds.iter().zip(&u[1 + nj..]).map(|(r, &v)| r.at(v)).collect();
            BoundaryConditions {
                demands,
                pump_speeds,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Shuffled 0.6/0.2/0.2 split; validation and test get `floor(0.2 n)`
    /// each, training the remainder.
    pub fn shuffled(n: usize, seed: u64) -> Result<Self> {
        let n_val = (VAL_FRACTION * n as f64).floor() as usize;
        let n_test = (TEST_FRACTION * n as f64).floor() as usize;
        if n_val == 0 || n_test == 0 || n - n_val - n_test == 0 {
            return Err(Error::TooFewScenes(format!(
                "{n} scenes leave an empty split"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        // separate stream from the sampler
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        idx.shuffle(&mut rng);
        let test = idx.split_off(n - n_test);
        let val = idx.split_off(n - n_test - n_val);
        Ok(Self {
            train: idx,
            val,
            test,
        })
    }
}

/// Per-network pressure statistics: standardization for the input channel,
/// min/max normalization for the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    pub fn unfitted() -> Self {
        Self {
            mean: f64::NAN,
            std: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        }
    }

    pub fn is_fitted(&self) -> bool {
        [self.mean, self.std, self.min, self.max]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Fits on every value of the given rows (population std).
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        for &v in rows.iter().flat_map(|r| r.iter()) {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if count == 0 {
            return Err(Error::EmptyInput("scaler fit"));
        }
        let mean = sum / count as f64;
        let var = rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / count as f64;
        let std = var.sqrt();
        if !(std > 0.0) || !(max > min) {
            return Err(Error::DegenerateScaler(format!(
                "std {std}, min {min}, max {max}"
            )));
        }
        Ok(Self {
            mean,
            std,
            min,
            max,
        })
    }

    fn check(&self) -> Result<()> {
        if self.is_fitted() {
            Ok(())
        } else {
            Err(Error::UnfittedScaler)
        }
    }

    pub fn scale_in(&self, p: f64) -> Result<f64> {
        self.check()?;
        Ok((p - self.mean) / self.std)
    }

    pub fn scale_out(&self, p: f64) -> Result<f64> {
        self.check()?;
        Ok((p - self.min) / (self.max - self.min))
    }

    pub fn scale_out_inverse(&self, y: f64) -> Result<f64> {
        self.check()?;
        Ok(y * (self.max - self.min) + self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitsFile {
    splits: Splits,
    scaler: Scaler,
    config: SceneConfig,
}

/// Solved scenes ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSet {
    pub node_names: Vec<String>,
    /// Pressure head [ft] per scene and node, fixed-head nodes included.
    pub pressures: Vec<Vec<f64>>,
    pub boundary: Vec<BoundaryConditions>,
    pub residuals: Vec<(f64, f64)>,
    /// Index of each retained scene in the sampled sequence.
    pub source_index: Vec<usize>,
    pub failures: Vec<SceneFailure>,
    pub splits: Splits,
    pub scaler: Scaler,
    pub config: SceneConfig,
}

impl SceneSet {
    pub fn len(&self) -> usize {
        self.pressures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pressures.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn rows<'a>(&'a self, idx: &'a [usize]) -> impl Iterator<Item = &'a [f64]> + 'a {
        idx.iter().map(move |&i| self.pressures[i].as_slice())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = SceneFileMeta {
            node_names: self.node_names.clone(),
            boundary: self.boundary.clone(),
            residuals: self.residuals.clone(),
            source_index: self.source_index.clone(),
            failures: self.failures.clone(),
        };
        write_scene_file(dir, &self.pressures, &meta)?;
        let sidecar = SplitsFile {
            splits: self.splits.clone(),
            scaler: self.scaler,
            config: self.config.clone(),
        };
        let path = dir.join(SPLITS_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&sidecar)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (pressures, meta) = read_scene_file(dir)?;
        let path = dir.join(SPLITS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: SplitsFile = serde_json::from_str(&text)?;
        let n = pressures.len();
        let mut seen = vec![false; n];
        for &i in sidecar
            .splits
            .train
            .iter()
            .chain(&sidecar.splits.val)
            .chain(&sidecar.splits.test)
        {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("{}: invalid split index {i}", path.display())));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(format!("{}: splits do not cover all scenes", path.display())));
        }
        Ok(Self {
            node_names: meta.node_names,
            pressures,
            boundary: meta.boundary,
            residuals: meta.residuals,
            source_index: meta.source_index,
            failures: meta.failures,
            splits: sidecar.splits,
            scaler: sidecar.scaler,
            config: sidecar.config,
        })
    }
}

/// Samples, solves, drops failed scenes, splits and fits the scaler on the
/// training rows.
pub fn build_sceneset(net: &Network, cfg: &SceneConfig) -> Result<SceneSet> {
    let bcs = sample_boundaries(net, cfg)?;
    let solved = batch_solve(net, &bcs, &SolverOptions::default());
    if !solved.failures.is_empty() {
        log::warn!(
            "{} of {} scenes failed to solve and were dropped",
            solved.failures.len(),
            bcs.len()
        );
    }
    let mut pressures = Vec::with_capacity(solved.states.len());
    let mut boundary = Vec::with_capacity(solved.states.len());
    let mut residuals = Vec::with_capacity(solved.states.len());
    let mut source_index = Vec::with_capacity(solved.states.len());
    for (i, state) in solved.states {
        residuals.push((state.mass_residual, state.energy_residual));
        pressures.push(state.pressures);
        boundary.push(bcs[i].clone());
        source_index.push(i);
    }
    let splits = Splits::shuffled(pressures.len(), cfg.seed)?;
    let scaler = Scaler::fit(splits.train.iter().map(|&i| pressures[i].as_slice()))?;
    Ok(SceneSet {
        node_names: net.node_names().to_vec(),
        pressures,
        boundary,
        residuals,
        source_index,
        failures: solved.failures,
        splits,
        scaler,
        config: cfg.clone(),
    })
}
