//! Chebyshev spectral graph convolution network with hand-written
//! reverse-mode gradients.
//!
//! Batches are stored node-major: row `node * batch + b` of an
//! `(n * batch) x F` matrix holds sample `b` at `node`. The same buffer read
//! as `n x (batch * F)` is what the sparse Laplacian products act on.

mod adam;
mod checkpoint;
pub(crate) mod train;

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{cheb_recursion, ScaledLaplacian};

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use train::{
    predict, train, train_samples, EpochRecord, Samples, TrainConfig, TrainOutcome, TrainingHistory,
};

/// Input channels: masked standardized pressure and the mask.
pub const INPUT_CHANNELS: usize = 2;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub k: usize,
    pub f_in: usize,
    pub f_out: usize,
}

/// One Chebyshev convolution. `theta` is stored as a `(K * F_in) x F_out`
/// matrix whose row block `k` is `Theta_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebLayer {
    pub shape: LayerShape,
    pub theta: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ChebLayer {
    pub fn zeros(k: usize, f_in: usize, f_out: usize) -> Result<Self> {
        if k == 0 || f_in == 0 || f_out == 0 {
            return Err(Error::Config(format!(
                "layer needs K, F_in, F_out >= 1, got ({k}, {f_in}, {f_out})"
            )));
        }
        Ok(Self {
            shape: LayerShape { k, f_in, f_out },
            theta: Array2::zeros((k * f_in, f_out)),
            bias: Array1::zeros(f_out),
        })
    }

    pub fn xavier_bound(&self) -> f64 {
        let LayerShape { k, f_in, f_out } = self.shape;
        (6.0 / (k * f_in + f_out) as f64).sqrt()
    }

    /// Uniform Xavier weights, zero bias.
    pub fn xavier_init(&mut self, rng: &mut impl Rng) {
        let bound = self.xavier_bound();
        self.theta
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..=bound));
        self.bias.fill(0.0);
    }

    pub fn theta_k(&self, k: usize) -> ArrayView2<'_, f64> {
        let f = self.shape.f_in;
        self.theta.slice(s![k * f..(k + 1) * f, ..])
    }

    /// `sum_k (T_k X) Theta_k + bias` for an `n x F_in` signal.
    pub fn forward(&self, lap: &ScaledLaplacian, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (pre, _) = self.forward_batch(lap, x, 1)?;
        Ok(pre)
    }

    /// Pre-activation output and the stacked `[T_0 X | ... | T_{K-1} X]`.
    fn forward_batch(
        &self,
        lap: &ScaledLaplacian,
        x: &Array2<f64>,
        batch: usize,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let LayerShape { k, f_in, .. } = self.shape;
        let n = lap.dim();
        if x.dim() != (n * batch, f_in) {
            return Err(Error::dims(
                format!("{}x{}", n * batch, f_in),
                format!("{}x{}", x.nrows(), x.ncols()),
            ));
        }
        let width = batch * f_in;
        let flat = x.as_standard_layout();
        let flat = flat.as_slice().expect("standard layout");
        let mut terms = vec![vec![0.0; n * width]; k];
        cheb_recursion(lap.matrix(), flat, width, &mut terms);

        let rows = n * batch;
        let mut stacked = Array2::<f64>::zeros((rows, k * f_in));
        for (kk, term) in terms.iter().enumerate() {
            for r in 0..rows {
                stacked
                    .slice_mut(s![r, kk * f_in..(kk + 1) * f_in])
                    .as_slice_mut()
                    .expect("contiguous row")
                    .copy_from_slice(&term[r * f_in..(r + 1) * f_in]);
            }
        }
        let mut pre = stacked.dot(&self.theta);
        pre += &self.bias;
        Ok((pre, stacked))
    }

    /// Gradient of `sum_k T_k dZ_k` where `dZ` is stacked like the forward
    /// terms; Clenshaw's recurrence avoids storing every `T_k`.
    fn input_grad(&self, lap: &ScaledLaplacian, d_stacked: &Array2<f64>, batch: usize) -> Array2<f64> {
        let LayerShape { k, f_in, .. } = self.shape;
        let n = lap.dim();
        let rows = n * batch;
        let width = batch * f_in;
        let block = |kk: usize| -> Vec<f64> {
            d_stacked
                .slice(s![.., kk * f_in..(kk + 1) * f_in])
                .iter()
                .copied()
                .collect()
        };
        let mut b1 = vec![0.0; n * width];
        let mut b2 = vec![0.0; n * width];
        let mut lb = vec![0.0; n * width];
        for kk in (1..k).rev() {
            // b_k = z_k + 2 L b_{k+1} - b_{k+2}
            lap.matrix().matmul_rows(&b1, width, &mut lb, 0.0);
            let z = block(kk);
            for i in 0..b2.len() {
                b2[i] = z[i] + 2.0 * lb[i] - b2[i];
            }
            std::mem::swap(&mut b1, &mut b2);
        }
        // z_0 + L b_1 - b_2
        lap.matrix().matmul_rows(&b1, width, &mut lb, 0.0);
        let z0 = block(0);
        let out: Vec<f64> = (0..lb.len()).map(|i| z0[i] + lb[i] - b2[i]).collect();
        Array2::from_shape_vec((rows, f_in), out).expect("shape")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Silu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Silu => silu(x),
            Self::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative from the pre-activation `x` and output `y`.
    fn grad(self, x: f64, y: f64) -> f64 {
        match self {
            Self::Silu => silu_grad(x),
            Self::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Parameter gradients, aligned with [`ChebModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &ChebModel) -> Self {
        Self {
            theta: model.layers.iter().map(|l| Array2::zeros(l.theta.dim())).collect(),
            bias: model.layers.iter().map(|l| Array1::zeros(l.bias.dim())).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&self.bias)
            .flat_map(|(t, b)| t.iter().chain(b.iter()).copied())
            .collect()
    }
}

struct LayerCache {
    input: Array2<f64>,
    stacked: Array2<f64>,
    pre: Array2<f64>,
    out: Array2<f64>,
}

/// Stack of Chebyshev layers: SiLU after hidden layers, sigmoid at the end.
#[derive(Debug, Clone)]
pub struct ChebModel {
    pub layers: Vec<ChebLayer>,
    laplacian: Arc<ScaledLaplacian>,
}

impl ChebModel {
    /// Builds hidden layers from `(K, F)` pairs plus a `K = 1` output layer
    /// mapping the last hidden width to one channel, Xavier-initialized.
    pub fn new(laplacian: Arc<ScaledLaplacian>, topology: &[(usize, usize)], seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(topology.len() + 1);
        let mut f_in = INPUT_CHANNELS;
        for &(k, f) in topology {
            layers.push(ChebLayer::zeros(k, f_in, f)?);
            f_in = f;
        }
        layers.push(ChebLayer::zeros(1, f_in, 1)?);
        let mut model = Self::from_layers(laplacian, layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            layer.xavier_init(&mut rng);
        }
        Ok(model)
    }

    pub fn from_layers(laplacian: Arc<ScaledLaplacian>, layers: Vec<ChebLayer>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("model needs at least one layer".into()));
        };
        if first.shape.f_in != INPUT_CHANNELS {
            return Err(Error::dims(
                format!("{INPUT_CHANNELS} input channels"),
                first.shape.f_in,
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].shape.f_out != pair[1].shape.f_in {
                return Err(Error::dims(pair[0].shape.f_out, pair[1].shape.f_in));
            }
        }
        let last = layers.last().expect("non-empty").shape.f_out;
        if last != 1 {
            return Err(Error::dims("1 output channel", last));
        }
        for l in &layers {
            if l.theta.dim() != (l.shape.k * l.shape.f_in, l.shape.f_out) || l.bias.len() != l.shape.f_out {
                return Err(Error::dims(format!("{:?}", l.shape), "inconsistent parameter arrays"));
            }
        }
        Ok(Self { layers, laplacian })
    }

    pub fn laplacian(&self) -> &ScaledLaplacian {
        &self.laplacian
    }

    pub fn laplacian_arc(&self) -> Arc<ScaledLaplacian> {
        Arc::clone(&self.laplacian)
    }

    pub fn node_count(&self) -> usize {
        self.laplacian.dim()
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        self.layers.iter().map(|l| l.shape).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.theta.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, each layer's theta (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.theta.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dims(self.param_count(), params.len()));
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for (dst, src) in l.theta.iter_mut().chain(l.bias.iter_mut()).zip(&mut it) {
                *dst = *src;
            }
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Sigmoid
        } else {
            Activation::Silu
        }
    }

    /// Receptive field in hops, `sum (K_i - 1)`.
    pub fn receptive_field(&self) -> usize {
        self.layers.iter().map(|l| l.shape.k - 1).sum()
    }

    /// Output in `(0, 1)` for one `n x 2` input.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward_batch(x, 1)
    }

    /// Output `(n * batch) x 1` for a node-major batch.
    pub fn forward_batch(&self, x: &Array2<f64>, batch: usize) -> Result<Array2<f64>> {
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let (mut pre, _) = layer.forward_batch(&self.laplacian, &h, batch)?;
            let act = self.activation(i);
            pre.mapv_inplace(|v| act.apply(v));
            h = pre;
        }
        Ok(h)
    }

    fn forward_cached(&self, x: &Array2<f64>, batch: usize) -> Result<Vec<LayerCache>> {
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = match caches.last() {
                Some(c) => c.out.clone(),
                None => x.to_owned(),
            };
            let (pre, stacked) = layer.forward_batch(&self.laplacian, &input, batch)?;
            let act = self.activation(i);
            let out = pre.mapv(|v| act.apply(v));
            caches.push(LayerCache {
                input,
                stacked,
                pre,
                out,
            });
        }
        Ok(caches)
    }

    /// Back-propagates `d_out` (gradient of the loss with respect to the
    /// model output) through cached activations.
    fn backward(&self, caches: &[LayerCache], d_out: Array2<f64>, batch: usize) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = d_out;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let c = &caches[i];
            let act = self.activation(i);
            let mut delta = upstream;
            ndarray::Zip::from(&mut delta)
                .and(&c.pre)
                .and(&c.out)
                .for_each(|d, &x, &y| *d *= act.grad(x, y));
            grads.theta[i] = c.stacked.t().dot(&delta);
            grads.bias[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let d_stacked = delta.dot(&layer.theta.t());
                upstream = layer.input_grad(&self.laplacian, &d_stacked, batch);
                debug_assert_eq!(upstream.dim(), c.input.dim());
            } else {
                break;
            }
        }
        grads
    }

    /// Gradients for an arbitrary output-gradient injection.
    pub fn gradients_for_output_grad(
        &self,
        x: &Array2<f64>,
        d_out: &Array2<f64>,
        batch: usize,
    ) -> Result<Gradients> {
        let caches = self.forward_cached(x, batch)?;
        let out = &caches.last().expect("non-empty").out;
        if out.dim() != d_out.dim() {
            return Err(Error::dims(format!("{:?}", out.dim()), format!("{:?}", d_out.dim())));
        }
        Ok(self.backward(&caches, d_out.to_owned(), batch))
    }

    /// Mean squared error over every node and sample, and its gradients.
    pub fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        target: &Array2<f64>,
        batch: usize,
    ) -> Result<(f64, Gradients)> {
        let caches = self.forward_cached(x, batch)?;
        let out = &caches.last().expect("non-empty").out;
        let loss = mse_all_nodes(out, target)?;
        let scale = 2.0 / out.len() as f64;
        let d_out = (out - target) * scale;
        Ok((loss, self.backward(&caches, d_out, batch)))
    }
}

/// Mean squared error over all entries.
pub fn mse_all_nodes(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::dims(
            format!("{:?}", target.dim()),
            format!("{:?}", pred.dim()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("mse"));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use crate::spectral::LambdaMaxMethod;
    use ndarray::array;

    fn path_laplacian(n: usize) -> Arc<ScaledLaplacian> {
        let adj = CsrMatrix::from_triplets(
            n,
            (0..n - 1).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)]),
        );
        Arc::new(ScaledLaplacian::from_adjacency(&adj, LambdaMaxMethod::Exact).unwrap())
    }

    #[test]
    fn activations() {
        assert_eq!(silu(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((silu(20.0) - 20.0).abs() < 1e-7);
        let h = 1e-5;
        assert!(((silu(h) - silu(-h)) / (2.0 * h) - 0.5).abs() < 1e-9);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        for x in [-3.0, -0.2, 0.0, 1.7] {
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_grad(x) - fd).abs() < 1e-9);
        }
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let mut a = ChebLayer::zeros(5, 3, 4).unwrap();
        let mut b = a.clone();
        a.xavier_init(&mut ChaCha8Rng::seed_from_u64(1));
        b.xavier_init(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        let bound = (6.0f64 / 19.0).sqrt();
        assert_eq!(a.xavier_bound(), bound);
        assert!(a.theta.iter().all(|w| w.abs() <= bound));
        assert!(a.theta.iter().any(|w| *w != 0.0));
        assert!(a.bias.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_theta_gives_bias() {
        let lap = path_laplacian(4);
        let mut layer = ChebLayer::zeros(3, 2, 2).unwrap();
        layer.bias = array![0.5, -1.0];
        let y = layer.forward(&lap, &Array2::ones((4, 2))).unwrap();
        for row in y.rows() {
            assert_eq!(row.to_vec(), vec![0.5, -1.0]);
        }
    }

    #[test]
    fn identity_k1() {
        let lap = path_laplacian(3);
        let mut layer = ChebLayer::zeros(1, 2, 2).unwrap();
        layer.theta = Array2::eye(2);
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(layer.forward(&lap, &x).unwrap(), x);
        assert!(layer.forward(&lap, &Array2::zeros((4, 2))).is_err());
    }

    #[test]
    fn table3_anytown_builds() {
        let model = ChebModel::new(path_laplacian(22), &[(39, 14), (43, 20), (45, 27)], 0).unwrap();
        assert_eq!(model.layers.len(), 4);
        assert_eq!(model.receptive_field(), 38 + 42 + 44);
        let y = model.forward(&Array2::from_elem((22, 2), 3.0)).unwrap();
        assert_eq!(y.dim(), (22, 1));
        assert!(y.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(y, model.forward(&Array2::from_elem((22, 2), 3.0)).unwrap());
    }

    #[test]
    fn mse_examples() {
        let t = Array2::from_elem((3, 1), 0.4);
        assert_eq!(mse_all_nodes(&t, &t).unwrap(), 0.0);
        let p = &t + 0.1;
        assert!((mse_all_nodes(&p, &t).unwrap() - 0.01).abs() < 1e-15);
        assert!(mse_all_nodes(&Array2::zeros((2, 1)), &t).is_err());
    }

    #[test]
    fn zero_injection_zero_gradients() {
        let model = ChebModel::new(path_laplacian(5), &[(3, 4)], 2).unwrap();
        let x = Array2::from_elem((5, 2), 0.3);
        let g = model
            .gradients_for_output_grad(&x, &Array2::zeros((5, 1)), 1)
            .unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batch_matches_single_samples() {
        let n = 6;
        let model = ChebModel::new(path_laplacian(n), &[(3, 4), (2, 3)], 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0)))
            .collect();
        let mut batch = Array2::zeros((n * 3, 2));
        for (b, s) in samples.iter().enumerate() {
            for node in 0..n {
                batch.row_mut(node * 3 + b).assign(&s.row(node));
            }
        }
        let out = model.forward_batch(&batch, 3).unwrap();
        for (b, s) in samples.iter().enumerate() {
            let single = model.forward(s).unwrap();
            for node in 0..n {
                assert!((out[[node * 3 + b, 0]] - single[[node, 0]]).abs() < 1e-14);
            }
        }
    }
}
