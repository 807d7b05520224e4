#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use wdsgnn::sparse::CsrMatrix;
use wdsgnn::spectral::ScaledLaplacian;

pub fn network_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/networks")
        .join(format!("{name}.inp"))
}

/// Random spanning tree plus extra edges, with positive weights when
/// `weighted`.
pub fn random_connected_graph(n: usize, weighted: bool, rng: &mut impl Rng) -> CsrMatrix {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a, b));
        }
    }
    let triplets: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .flat_map(|(a, b)| {
            let w = if weighted { rng.random_range(0.1..3.0) } else { 1.0 };
            [(a, b, w), (b, a, w)]
        })
        .collect();
    CsrMatrix::from_triplets(n, triplets)
}

pub fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

/// `T_k(L) X` evaluated through the eigendecomposition,
/// `U cos(k arccos Lambda) U^T X`.
pub fn spectral_cheb(lap: &ScaledLaplacian, x: &Array2<f64>, k: usize) -> Array2<f64> {
    let eig = SymmetricEigen::new(dense(lap.matrix()));
    let n = x.nrows();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (k as f64 * l.clamp(-1.0, 1.0).acos()).cos()));
    let tk = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    let xm = DMatrix::from_row_iterator(n, x.ncols(), x.iter().copied());
    let r = tk * xm;
    Array2::from_shape_fn((n, x.ncols()), |(i, j)| r[(i, j)])
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn relative_frobenius(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    frobenius(&(got - want)) / frobenius(want).max(1e-300)
}

/// Worst relative Frobenius error of `cheb_apply` and `ChebLayer::forward`
/// against the eigendecomposition over `graphs` random graphs.
pub fn spectral_oracle_error(graphs: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use wdsgnn::chebnet::ChebLayer;
    use wdsgnn::spectral::{cheb_apply, LambdaMaxMethod};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for g in 0..graphs {
        let n = rng.random_range(2..=10);
        let adj = random_connected_graph(n, g % 2 == 1, &mut rng);
        let lap = ScaledLaplacian::from_adjacency(&adj, LambdaMaxMethod::Exact).unwrap();
        let k = rng.random_range(1..=10);
        let (f_in, f_out) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let x = Array2::from_shape_fn((n, f_in), |_| rng.random_range(-1.0..1.0));

        let terms = cheb_apply(&lap, &x, k).unwrap();
        let oracle: Vec<Array2<f64>> = (0..k).map(|i| spectral_cheb(&lap, &x, i)).collect();
        for (got, want) in terms.iter().zip(&oracle) {
            worst = worst.max(relative_frobenius(got, want));
        }

        let mut layer = ChebLayer::zeros(k, f_in, f_out).unwrap();
        layer.theta.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        let got = layer.forward(&lap, &x).unwrap();
        let mut want = Array2::from_shape_fn((n, f_out), |(_, j)| layer.bias[j]);
        for (i, tx) in oracle.iter().enumerate() {
            want = want + tx.dot(&layer.theta_k(i));
        }
        worst = worst.max(relative_frobenius(&got, &want));
    }
    worst
}

/// Compares back-propagated gradients of a three-layer model (two hidden
/// layers and the output layer) on a random 8-node graph with central
/// differences. Returns the worst `|a - d| / max(|a|, |d|, 1e-6)`.
pub fn gradient_check(seed: u64, n: usize) -> f64 {
    use rand::SeedableRng;
    use std::sync::Arc;
    use wdsgnn::chebnet::ChebModel;
    use wdsgnn::spectral::LambdaMaxMethod;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let adj = random_connected_graph(n, seed.is_multiple_of(2), &mut rng);
    let lap = Arc::new(ScaledLaplacian::from_adjacency(&adj, LambdaMaxMethod::Exact).unwrap());
    let mut model = ChebModel::new(lap, &[(3, 4), (4, 3)], seed).unwrap();
    let params: Vec<f64> = model.params().iter().map(|_| rng.random_range(-0.8..0.8)).collect();
    model.set_params(&params).unwrap();

    let batch = 2;
    let x = Array2::from_shape_fn((n * batch, 2), |_| rng.random_range(-1.0..1.0));
    let target = Array2::from_shape_fn((n * batch, 1), |_| rng.random_range(0.0..1.0));
    let (_, grads) = model.loss_and_gradients(&x, &target, batch).unwrap();
    let analytic = grads.flatten();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for i in 0..p.len() {
        p[i] = params[i] + h;
        model.set_params(&p).unwrap();
        let up = model.loss_and_gradients(&x, &target, batch).unwrap().0;
        p[i] = params[i] - h;
        model.set_params(&p).unwrap();
        let down = model.loss_and_gradients(&x, &target, batch).unwrap().0;
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

/// `|head - (H - R q^1.852)|` for a reservoir feeding one junction.
pub fn single_pipe_error(demand: f64, length: f64) -> f64 {
    use wdsgnn::hydraulics::{solve_steady_state, BoundaryConditions, SolverOptions};
    let net = wdsgnn::network::NetworkBuilder::new()
        .junction("j", 0.0, demand)
        .reservoir("r", 100.0)
        .pipe("p", "r", "j", length, 1.0, 100.0)
        .build()
        .unwrap();
    let s = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default()).unwrap();
    let expected = 100.0 - 4.727 * 100f64.powf(-1.852) * length * demand.powf(1.852);
    (s.heads[0] - expected).abs()
}

/// Largest deviation from an even split over two identical parallel pipes.
pub fn parallel_split_error(demand: f64) -> f64 {
    use wdsgnn::hydraulics::{solve_steady_state, BoundaryConditions, SolverOptions};
    let net = wdsgnn::network::NetworkBuilder::new()
        .junction("j", 5.0, demand)
        .reservoir("r", 120.0)
        .pipe("a", "r", "j", 800.0, 0.75, 110.0)
        .pipe("b", "r", "j", 800.0, 0.75, 110.0)
        .build()
        .unwrap();
    let s = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default()).unwrap();
    (s.flows[0] - demand / 2.0).abs().max((s.flows[1] - demand / 2.0).abs())
}

pub struct MassCheck {
    pub scenes: usize,
    pub failures: usize,
    /// Worst `max |continuity residual| / total demand`.
    pub worst_relative_mass: f64,
    /// Worst absolute energy residual [ft].
    pub worst_energy: f64,
}

/// Solves `n` generated Anytown scenes and recomputes their residuals.
pub fn anytown_mass_check(n: usize, seed: u64) -> MassCheck {
    use wdsgnn::hydraulics::{batch_solve, energy_residuals, mass_residuals, SolverOptions};
    use wdsgnn::scenegen::{sample_boundaries, SceneConfig};

    let net = wdsgnn::network::Network::from_inp_file(network_path("anytown")).unwrap();
    let cfg = SceneConfig {
        n_scenes: n,
        seed,
        ..SceneConfig::default()
    };
    let scenes = sample_boundaries(&net, &cfg).unwrap();
    let batch = batch_solve(&net, &scenes, &SolverOptions::default());
    let mut check = MassCheck {
        scenes: n,
        failures: batch.failures.len(),
        worst_relative_mass: 0.0,
        worst_energy: 0.0,
    };
    for (i, state) in &batch.states {
        let bc = &scenes[*i];
        let total: f64 = bc.demands.iter().sum();
        let mass = mass_residuals(&net, bc, state).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let energy = energy_residuals(&net, bc, state).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        check.worst_relative_mass = check.worst_relative_mass.max(mass / total);
        check.worst_energy = check.worst_energy.max(energy);
    }
    check
}
