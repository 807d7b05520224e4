//! Weighted adjacency matrices, the scaled normalised graph Laplacian and the
//! Chebyshev basis applied through sparse three-term recursion.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LinkKind, Network, Pipe};
use crate::sparse::CsrMatrix;

/// Hazen-Williams constant for US customary units (ft, cfs).
pub const HW_CONSTANT: f64 = 4.727;
pub const HW_FLOW_EXPONENT: f64 = 1.852;
pub const HW_DIAMETER_EXPONENT: f64 = 4.871;

/// Lower end of the rescaled logarithmic weights.
pub const LOG_WEIGHT_FLOOR: f64 = 0.01;

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX_ITER: usize = 10_000;
/// Largest graph for which [`LambdaMaxMethod::Auto`] uses a dense eigensolve.
pub const DENSE_EIGEN_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Binary,
    Weighted,
    Logarithmic,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [Self::Binary, Self::Weighted, Self::Logarithmic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Weighted => "weighted",
            Self::Logarithmic => "logarithmic",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Self::Binary),
            "weighted" => Ok(Self::Weighted),
            "logarithmic" | "log" => Ok(Self::Logarithmic),
            other => Err(Error::Config(format!("unknown weight scheme '{other}'"))),
        }
    }
}

/// Hydraulic conductance of a pipe, `4.727 C^1.852 d^4.871 / L`.
pub fn edge_weight_hw(pipe: &Pipe) -> Result<f64> {
    for (attribute, value) in [
        ("length", pipe.length),
        ("diameter", pipe.diameter),
        ("roughness", pipe.roughness),
    ] {
        if !(value > 0.0) {
            return Err(Error::NonPositiveAttribute {
                element: "pipe",
                name: pipe.name.clone(),
                attribute,
                value,
            });
        }
    }
    Ok(HW_CONSTANT
        * pipe.roughness.powf(HW_FLOW_EXPONENT)
        * pipe.diameter.powf(HW_DIAMETER_EXPONENT)
        / pipe.length)
}

/// Symmetric weighted adjacency over all nodes.
///
/// Parallel pipes add their raw conductances before normalisation. Any node
/// pair joined by a pump or valve has strength 1.
pub fn build_adjacency(net: &Network, scheme: WeightScheme) -> Result<CsrMatrix> {
    let n = net.node_count();
    if scheme == WeightScheme::Binary {
        return Ok(net.adjacency_structure());
    }

    // raw conductance per unordered pair; NaN marks a pump/valve connection
    let mut pairs = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for link in net.links() {
        let key = (link.from.min(link.to), link.from.max(link.to));
        match link.kind {
            LinkKind::Pipe => {
                let w = edge_weight_hw(&net.pipes[link.index])?;
                let slot = pairs.entry(key).or_insert(0.0);
                if !slot.is_nan() {
                    *slot += w;
                }
            }
            LinkKind::Pump | LinkKind::Valve => {
                pairs.insert(key, f64::NAN);
            }
        }
    }

    let pipe_weights: Vec<f64> = pairs.values().copied().filter(|w| !w.is_nan()).collect();
    let normalised: Box<dyn Fn(f64) -> f64> = match scheme {
        WeightScheme::Weighted => {
            let max = pipe_weights.iter().copied().fold(0.0, f64::max);
            Box::new(move |w| w / max)
        }
        WeightScheme::Logarithmic => {
            let logs = pipe_weights.iter().map(|w| w.log10());
            let lo = logs.clone().fold(f64::INFINITY, f64::min);
            let hi = logs.fold(f64::NEG_INFINITY, f64::max);
            Box::new(move |w| {
                if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    1.0
                } else {
                    LOG_WEIGHT_FLOOR + (1.0 - LOG_WEIGHT_FLOOR) * (w.log10() - lo) / (hi - lo)
                }
            })
        }
        WeightScheme::Binary => unreachable!(),
    };

    let triplets = pairs.into_iter().flat_map(|((a, b), w)| {
        let v = if w.is_nan() { 1.0 } else { normalised(w) };
        [(a, b, v), (b, a, v)]
    });
    Ok(CsrMatrix::from_triplets(n, triplets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMaxMethod {
    Exact,
    PowerIteration,
    /// Exact up to [`DENSE_EIGEN_LIMIT`] nodes, power iteration above.
    Auto,
}

/// `L_hat = (2 / lambda_max) (I - D^-1/2 A D^-1/2) - I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledLaplacian {
    matrix: CsrMatrix,
    lambda_max: f64,
    scheme: Option<WeightScheme>,
}

impl ScaledLaplacian {
    pub fn from_network(net: &Network, scheme: WeightScheme, method: LambdaMaxMethod) -> Result<Self> {
        let adjacency = build_adjacency(net, scheme)?;
        let mut lap = Self::from_adjacency(&adjacency, method)?;
        lap.scheme = Some(scheme);
        Ok(lap)
    }

    pub fn from_adjacency(adjacency: &CsrMatrix, method: LambdaMaxMethod) -> Result<Self> {
        let n = adjacency.dim();
        let degree = adjacency.row_sums();
        if let Some(i) = degree.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::IsolatedNode(i));
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| d.sqrt().recip()).collect();

        // normalised Laplacian, pattern = adjacency ∪ diagonal
        let triplets = (0..n)
            .flat_map(|i| {
                let s = &inv_sqrt;
                adjacency
                    .row(i)
                    .filter(move |(j, _)| *j != i)
                    .map(move |(j, a)| (i, j, -s[i] * a * s[j]))
            })
            .chain((0..n).map(|i| (i, i, 1.0 - adjacency.get(i, i) * inv_sqrt[i] * inv_sqrt[i])));
        let normalised = CsrMatrix::from_triplets(n, triplets);

        let use_exact = match method {
            LambdaMaxMethod::Exact => true,
            LambdaMaxMethod::PowerIteration => false,
            LambdaMaxMethod::Auto => n <= DENSE_EIGEN_LIMIT,
        };
        let lambda_max = if use_exact {
            *dense_eigenvalues(&normalised)
                .last()
                .ok_or_else(|| Error::EigenFailure("empty matrix".into()))?
        } else {
            power_iteration(&normalised, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITER)?
        };
        if !(lambda_max > 0.0) {
            return Err(Error::EigenFailure(format!(
                "non-positive largest eigenvalue {lambda_max}"
            )));
        }

        let scale = 2.0 / lambda_max;
        let matrix = normalised.map_entries(|i, j, v| if i == j { scale * v - 1.0 } else { scale * v });
        Ok(Self {
            matrix,
            lambda_max,
            scheme: None,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn scheme(&self) -> Option<WeightScheme> {
        self.scheme
    }

    /// Relabels nodes with `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            matrix: self.matrix.permuted(perm),
            lambda_max: self.lambda_max,
            scheme: self.scheme,
        }
    }

    /// Share of absolute mass on the diagonal of `L_hat`.
    pub fn diagonal_mass_fraction(&self) -> f64 {
        let (mut diag, mut total) = (0.0, 0.0);
        for i in 0..self.dim() {
            for (j, v) in self.matrix.row(i) {
                total += v.abs();
                if i == j {
                    diag += v.abs();
                }
            }
        }
        diag / total
    }

    /// Writes `<stem>.csv` (dense, row-major) and `<stem>.json` (header).
    pub fn export(&self, dir: &Path, stem: &str, node_names: &[String]) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&csv_path)?;
        for row in self.matrix.to_dense() {
            writer.serialize(row)?;
        }
        writer.flush().map_err(|e| Error::io(&csv_path, e))?;

        let header = LaplacianHeader {
            scheme: self.scheme,
            lambda_max: self.lambda_max,
            n: self.dim(),
            layout: "row-major dense".into(),
            matrix_file: format!("{stem}.csv"),
            node_names: node_names.to_vec(),
        };
        let json_path = dir.join(format!("{stem}.json"));
        std::fs::write(&json_path, serde_json::to_string_pretty(&header)?)
            .map_err(|e| Error::io(&json_path, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplacianHeader {
    pub scheme: Option<WeightScheme>,
    pub lambda_max: f64,
    pub n: usize,
    pub layout: String,
    pub matrix_file: String,
    pub node_names: Vec<String>,
}

/// Ascending eigenvalues of a symmetric sparse matrix via a dense solve.
pub fn dense_eigenvalues(m: &CsrMatrix) -> Vec<f64> {
    let n = m.dim();
    let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let mut ev: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
///
/// Stops when the eigen-residual `||M v - lambda v||` drops below `tol`.
pub fn power_iteration(m: &CsrMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.dim();
    // deterministic start with components along every node
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
    normalise(&mut v);
    for _ in 0..max_iter {
        let w = m.matvec(&v);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        v = w;
        if normalise(&mut v) == 0.0 {
            return Err(Error::EigenFailure("iterate collapsed to zero".into()));
        }
    }
    Err(Error::EigenFailure(format!(
        "power iteration did not converge in {max_iter} iterations"
    )))
}

fn normalise(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Chebyshev recursion on a row-major `n x width` block: fills `out[k]` with
/// `T_k(L_hat) x` for `k < out.len()`.
pub(crate) fn cheb_recursion(lap: &CsrMatrix, x: &[f64], width: usize, out: &mut [Vec<f64>]) {
    let k_max = out.len();
    if k_max == 0 {
        return;
    }
    out[0].copy_from_slice(x);
    if k_max == 1 {
        return;
    }
    let (head, tail) = out.split_at_mut(1);
    lap.matmul_rows(&head[0], width, &mut tail[0], 0.0);
    for k in 2..k_max {
        let (done, rest) = out.split_at_mut(k);
        let target = &mut rest[0];
        target.copy_from_slice(&done[k - 2]);
        // T_k = 2 L T_{k-1} - T_{k-2}
        lap.matmul_rows(&done[k - 1], width, target, -0.5);
        target.iter_mut().for_each(|v| *v *= 2.0);
    }
}

/// `[T_0 X, T_1 X, ..., T_{K-1} X]` for an `n x f` signal.
pub fn cheb_apply(lap: &ScaledLaplacian, x: &Array2<f64>, k: usize) -> Result<Vec<Array2<f64>>> {
    let (n, f) = x.dim();
    if n != lap.dim() {
        return Err(Error::dims(format!("{} rows", lap.dim()), format!("{n} rows")));
    }
    if k == 0 {
        return Err(Error::Config("Chebyshev order K must be at least 1".into()));
    }
    let flat: Vec<f64> = x.iter().copied().collect();
    let mut out = vec![vec![0.0; n * f]; k];
    cheb_recursion(lap.matrix(), &flat, f, &mut out);
    Ok(out
        .into_iter()
        .map(|v| Array2::from_shape_vec((n, f), v).expect("shape"))
        .collect())
}
