use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamState, ChebModel, Gradients, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::observe::{assemble_input, ObservationMask};
use crate::scenegen::SceneSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            patience: 50,
            min_delta: 1e-6,
            weight_decay: 0.0,
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("min_delta", self.min_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("max_epochs, patience and batch_size must be positive".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Model inputs (`n x 2` per scene) and normalized targets (`n` per scene).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    n: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Samples {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &Array2<f64>, target: &[f64]) -> Result<()> {
        if input.dim() != (self.n, INPUT_CHANNELS) {
            return Err(Error::dims(
                format!("{}x{}", self.n, INPUT_CHANNELS),
                format!("{}x{}", input.nrows(), input.ncols()),
            ));
        }
        if target.len() != self.n {
            return Err(Error::dims(self.n, target.len()));
        }
        self.inputs.extend(input.iter());
        self.targets.extend_from_slice(target);
        Ok(())
    }

    /// Scenes `idx` of `set` observed through `mask`; targets are min/max
    /// normalized pressures.
    pub fn from_scenes(set: &SceneSet, idx: &[usize], mask: &ObservationMask) -> Result<Self> {
        let mut out = Self::new(set.node_count());
        for &i in idx {
            let p = &set.pressures[i];
            let input = assemble_input(p, mask, &set.scaler)?;
            let target = p
                .iter()
                .map(|&v| set.scaler.scale_out(v))
                .collect::<Result<Vec<f64>>>()?;
            out.push(&input, &target)?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.n.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.n..(i + 1) * self.n]
    }

    /// Node-major batch of the given samples.
    pub fn batch(&self, idx: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let b = idx.len();
        let n = self.n;
        let mut x = Array2::zeros((n * b, INPUT_CHANNELS));
        let mut y = Array2::zeros((n * b, 1));
        for (j, &s) in idx.iter().enumerate() {
            for node in 0..n {
                let row = node * b + j;
                let src = (s * n + node) * INPUT_CHANNELS;
                for c in 0..INPUT_CHANNELS {
                    x[[row, c]] = self.inputs[src + c];
                }
                y[[row, 0]] = self.targets[s * n + node];
            }
        }
        (x, y)
    }
}

/// Predictions in normalized units, one row of `n` values per sample.
pub fn predict(model: &ChebModel, samples: &Samples, batch_size: usize) -> Result<Vec<Vec<f64>>> {
    let n = samples.node_count();
    let all: Vec<usize> = (0..samples.len()).collect();
    let mut out = Vec::with_capacity(all.len());
    for chunk in all.chunks(batch_size.max(1)) {
        let (x, _) = samples.batch(chunk);
        let y = model.forward_batch(&x, chunk.len())?;
        for j in 0..chunk.len() {
            out.push((0..n).map(|node| y[[node * chunk.len() + j, 0]]).collect());
        }
    }
    Ok(out)
}

fn mean_loss(model: &ChebModel, samples: &Samples, batch_size: usize) -> Result<f64> {
    let pred = predict(model, samples, batch_size)?;
    let total: f64 = pred
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.iter()
                .zip(samples.target(i))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / (samples.len() * samples.node_count()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let epochs = r.deserialize().collect::<std::result::Result<Vec<EpochRecord>, _>>()?;
        Ok(Self { epochs })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: TrainingHistory,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Trains on `train` with early stopping on `val`; the model is left holding
/// the parameters of the epoch with the lowest validation loss.
///
/// The reported training loss of an epoch is the sample-weighted mean of its
/// mini-batch losses.
pub fn train_samples(
    model: &mut ChebModel,
    train: &Samples,
    val: &Samples,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyInput("training or validation samples"));
    }
    let n = model.node_count();
    if train.node_count() != n || val.node_count() != n {
        return Err(Error::dims(n, train.node_count()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainingHistory::default();
    let mut best_params = model.params();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    // improvement reference for patience, only moves by at least min_delta
    let mut reference = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train.batch(chunk);
            let (loss, grads): (f64, Gradients) = model.loss_and_gradients(&x, &y, chunk.len())?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss {
                    epoch,
                    train_loss: loss,
                    val_loss: f64::NAN,
                });
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(model, &grads, &mut adam, cfg);
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = mean_loss(model, val, cfg.batch_size.max(64))?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::DivergedLoss {
                epoch,
                train_loss,
                val_loss,
            });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.params();
        }
        if val_loss < reference - cfg.min_delta {
            reference = val_loss;
            stale = 0;
        } else {
            stale += 1;
        }
        if epoch % 50 == 0 || epoch == 1 {
            log::info!("epoch {epoch}: train {train_loss:.3e}, val {val_loss:.3e}");
        }
        if stale >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    model.set_params(&best_params)?;
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}

/// Trains on the scene set's train split observed through `mask`, with
/// early stopping on its validation split.
pub fn train(model: &mut ChebModel, set: &SceneSet, mask: &ObservationMask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if mask.len() != model.node_count() || set.node_count() != model.node_count() {
        return Err(Error::dims(model.node_count(), mask.len()));
    }
    let train = Samples::from_scenes(set, &set.splits.train, mask)?;
    let val = Samples::from_scenes(set, &set.splits.val, mask)?;
    train_samples(model, &train, &val, cfg)
}
