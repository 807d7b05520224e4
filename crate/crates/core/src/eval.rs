//! Reconstruction metrics: per-node relative error, its empirical CDF and
//! Taylor-diagram statistics for the model and the naive baseline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chebnet::{predict, ChebModel, Samples};
use crate::error::{Error, Result};
use crate::observe::{naive_predict, ObservationMask};
use crate::scenegen::SceneSet;

/// Truth values below this magnitude [ft] are excluded from relative errors.
pub const NEAR_ZERO_TRUTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    /// `|pred - truth| / |truth|`, `None` where the truth is near zero.
    pub values: Vec<Option<f64>>,
    pub excluded: usize,
}

pub fn relative_error(pred: &[f64], truth: &[f64]) -> Result<RelativeErrors> {
    if pred.len() != truth.len() {
        return Err(Error::dims(truth.len(), pred.len()));
    }
    let values: Vec<Option<f64>> = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (t.abs() >= NEAR_ZERO_TRUTH).then(|| (p - t).abs() / t.abs()))
        .collect();
    let excluded = values.iter().filter(|v| v.is_none()).count();
    Ok(RelativeErrors { values, excluded })
}

/// Sorted `(value, (i + 1) / N)` points.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("ecdf"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorStats {
    /// `sigma_pred / sigma_truth`.
    pub normalized_std: f64,
    pub correlation: f64,
    /// Centered RMS difference divided by `sigma_truth`.
    pub centered_rmse: f64,
}

impl TaylorStats {
    /// `cRMSE^2 - (s^2 + 1 - 2 s rho)`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        let s = self.normalized_std;
        self.centered_rmse.powi(2) - (s * s + 1.0 - 2.0 * s * self.correlation)
    }
}

/// Taylor statistics over all scenes and nodes, population moments.
///
/// A constant prediction has no defined correlation; it is reported as 0,
/// which keeps the Taylor identity exact.
pub fn taylor_stats(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<TaylorStats> {
    if pred.len() != truth.len() {
        return Err(Error::dims(truth.len(), pred.len()));
    }
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::dims(t.len(), p.len()));
        }
    }
    let p: Vec<f64> = pred.iter().flatten().copied().collect();
    let t: Vec<f64> = truth.iter().flatten().copied().collect();
    if t.is_empty() {
        return Err(Error::EmptyInput("taylor statistics"));
    }
    let n = t.len() as f64;
    // an exactly constant prediction must not pick up rounding noise from its mean
    let mp = if p.iter().all(|v| *v == p[0]) {
        p[0]
    } else {
        p.iter().sum::<f64>() / n
    };
    let mt = t.iter().sum::<f64>() / n;
    let (mut spp, mut stt, mut spt) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(&t) {
        let (da, db) = (a - mp, b - mt);
        spp += da * da;
        stt += db * db;
        spt += da * db;
    }
    let sigma_t = (stt / n).sqrt();
    if !(sigma_t > 0.0) {
        return Err(Error::ZeroVariance("truth"));
    }
    let sigma_p = (spp / n).sqrt();
    let normalized_std = sigma_p / sigma_t;
    let correlation = if sigma_p > 0.0 {
        (spt / (spp * stt).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    // mean((p' - t')^2) expanded in the same sums the other terms use
    let crmse_sq = ((spp + stt - 2.0 * spt) / n).max(0.0) / (sigma_t * sigma_t);
    Ok(TaylorStats {
        normalized_std,
        correlation,
        centered_rmse: crmse_sq.sqrt(),
    })
}

/// Metrics of one prediction set against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// Scenes x nodes; `None` marks excluded near-zero truth.
    pub rel_errors: Vec<Vec<Option<f64>>>,
    pub ecdf: Vec<(f64, f64)>,
    pub taylor: TaylorStats,
    pub mean_relative_error: f64,
    pub excluded: usize,
}

pub fn metrics(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<ModelMetrics> {
    let taylor = taylor_stats(pred, truth)?;
    let mut rel_errors = Vec::with_capacity(pred.len());
    let mut excluded = 0;
    for (p, t) in pred.iter().zip(truth) {
        let r = relative_error(p, t)?;
        excluded += r.excluded;
        rel_errors.push(r.values);
    }
    let flat: Vec<f64> = rel_errors.iter().flatten().flatten().copied().collect();
    let ecdf = ecdf(&flat)?;
    let mean_relative_error = flat.iter().sum::<f64>() / flat.len() as f64;
    Ok(ModelMetrics {
        rel_errors,
        ecdf,
        taylor,
        mean_relative_error,
        excluded,
    })
}

/// Test-split evaluation of a model and the naive baseline, in pressure
/// head [ft].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub node_names: Vec<String>,
    pub observation_ratio: f64,
    pub observed_nodes: Vec<usize>,
    /// Indices into the scene set of the evaluated scenes.
    pub scenes: Vec<usize>,
    pub model: ModelMetrics,
    pub baseline: ModelMetrics,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Compares given predictions and the naive baseline with the truth.
pub fn evaluate_predictions(
    pred: &[Vec<f64>],
    truth: &[Vec<f64>],
    mask: &ObservationMask,
) -> Result<(ModelMetrics, ModelMetrics)> {
    let naive = truth
        .iter()
        .map(|t| naive_predict(t, mask))
        .collect::<Result<Vec<_>>>()?;
    Ok((metrics(pred, truth)?, metrics(&naive, truth)?))
}

/// Runs the model on the test split and reports both models.
pub fn evaluate(model: &ChebModel, set: &SceneSet, mask: &ObservationMask) -> Result<EvalReport> {
    if mask.len() != set.node_count() {
        return Err(Error::dims(set.node_count(), mask.len()));
    }
    let samples = Samples::from_scenes(set, &set.splits.test, mask)?;
    let pred = predict(model, &samples, 64)?
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|y| set.scaler.scale_out_inverse(y))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Vec<f64>> = set.rows(&set.splits.test).map(<[f64]>::to_vec).collect();
    let (model, baseline) = evaluate_predictions(&pred, &truth, mask)?;
    Ok(EvalReport {
        node_names: set.node_names.clone(),
        observation_ratio: mask.ratio,
        observed_nodes: mask.observed_nodes(),
        scenes: set.splits.test.clone(),
        model,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        let t = [10.0, -4.0, 0.0];
        let r = relative_error(&t, &t).unwrap();
        assert_eq!(r.values, vec![Some(0.0), Some(0.0), None]);
        assert_eq!(r.excluded, 1);
        let p: Vec<f64> = t.iter().map(|v| v * 1.05).collect();
        let r = relative_error(&p, &t).unwrap();
        assert!((r.values[0].unwrap() - 0.05).abs() < 1e-15);
        assert!((r.values[1].unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[0.1]).unwrap(), vec![(0.1, 1.0)]);
        assert_eq!(ecdf(&[0.2, 0.1]).unwrap(), vec![(0.1, 0.5), (0.2, 1.0)]);
        assert!(matches!(ecdf(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn taylor_examples() {
        let t = vec![vec![1.0, 2.0, 4.0], vec![3.0, 0.5, 7.0]];
        let same = taylor_stats(&t, &t).unwrap();
        assert_eq!(same.normalized_std, 1.0);
        assert!((same.correlation - 1.0).abs() < 1e-15);
        assert_eq!(same.centered_rmse, 0.0);

        let shifted: Vec<Vec<f64>> = t.iter().map(|r| r.iter().map(|v| v + 3.0).collect()).collect();
        let s = taylor_stats(&shifted, &t).unwrap();
        assert!((s.normalized_std - 1.0).abs() < 1e-12);
        assert!((s.correlation - 1.0).abs() < 1e-12);
        assert!(s.centered_rmse < 1e-7);

        let doubled: Vec<Vec<f64>> = t.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
        let d = taylor_stats(&doubled, &t).unwrap();
        assert!((d.normalized_std - 2.0).abs() < 1e-12);
        assert!((d.correlation - 1.0).abs() < 1e-12);
        assert!((d.centered_rmse - 1.0).abs() < 1e-12);

        let flat = vec![vec![5.0; 3]; 2];
        assert!(matches!(taylor_stats(&t, &flat), Err(Error::ZeroVariance(_))));
        let c = taylor_stats(&flat, &t).unwrap();
        assert_eq!((c.normalized_std, c.correlation), (0.0, 0.0));
        assert!(c.identity_residual().abs() < 1e-12);
    }

    #[test]
    fn baseline_differs_from_reference_when_unobserved_vary() {
        let mask = ObservationMask::from_bits(vec![true, false, false]).unwrap();
        let truth = vec![vec![10.0, 20.0, 30.0], vec![12.0, 25.0, 21.0]];
        let (m, b) = evaluate_predictions(&truth, &truth, &mask).unwrap();
        assert_eq!(m.taylor.centered_rmse, 0.0);
        assert!(b.taylor.centered_rmse > 0.0);
        assert_eq!(m.ecdf.last().unwrap().1, 1.0);
    }
}
