//! Steady-state hydraulic solver (demand-driven, Hazen-Williams losses)
//! producing ground-truth nodal pressures.
//!
//! The solver is a global-gradient Newton iteration on link flows and
//! junction heads: each step eliminates the flow corrections and solves the
//! symmetric positive definite head system `S G^-1 S^T dH = rhs`.

mod io;
mod pump;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LinkKind, LinkRef, Network, Pipe};
use crate::spectral::{HW_CONSTANT, HW_DIAMETER_EXPONENT, HW_FLOW_EXPONENT};

pub use io::{read_scene_file, write_scene_file, SceneFileMeta};
pub use pump::PumpCurve;

/// Below this flow [cfs] losses use the secant slope at the threshold.
pub const ZERO_FLOW_THRESHOLD: f64 = 1e-6;
/// Resistance [ft/cfs] of a pump against reverse flow (closed check valve).
pub const PUMP_REVERSE_RESISTANCE: f64 = 1e6;
/// Fully open valves: loss of 1e-7 ft at 10 cfs.
const VALVE_RESISTANCE: f64 = 1e-7 / 70.794_578_438_413_8; // 10^1.852
const MIN_GRADIENT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    /// Per-junction demand [cfs].
    pub demands: Vec<f64>,
    /// Per-pump relative speed.
    pub pump_speeds: Vec<f64>,
}

impl BoundaryConditions {
    /// Base demands at nominal pump speed.
    pub fn nominal(net: &Network) -> Self {
        Self {
            demands: net.junctions.iter().map(|j| j.base_demand).collect(),
            pump_speeds: vec![1.0; net.pumps.len()],
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.demands.len() != net.junction_count() {
            return Err(Error::dims(
                format!("{} demands", net.junction_count()),
                self.demands.len(),
            ));
        }
        if self.pump_speeds.len() != net.pumps.len() {
            return Err(Error::dims(
                format!("{} pump speeds", net.pumps.len()),
                self.pump_speeds.len(),
            ));
        }
        if let Some((i, d)) = self
            .demands
            .iter()
            .enumerate()
            .find(|(_, d)| !(**d >= 0.0) || !d.is_finite())
        {
            return Err(Error::InvalidBoundary(format!(
                "demand of junction '{}' is {d}",
                net.junctions[i].name
            )));
        }
        for (pump, &speed) in net.pumps.iter().zip(&self.pump_speeds) {
            let (lo, hi) = pump.speed_bounds;
            let slack = 1e-12 * hi;
            if !(speed >= lo - slack && speed <= hi + slack) {
                return Err(Error::InvalidBoundary(format!(
                    "speed {speed} of pump '{}' outside [{lo}, {hi}]",
                    pump.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    /// Hydraulic head per node [ft].
    pub heads: Vec<f64>,
    /// Flow per link in [`Network::links`] order, positive from `from` to `to` [cfs].
    pub flows: Vec<f64>,
    /// Pressure head per node, `head - elevation` [ft].
    pub pressures: Vec<f64>,
    pub iterations: usize,
    pub mass_residual: f64,
    pub energy_residual: f64,
}

impl HydraulicState {
    pub fn junction_pressures<'a>(&'a self, net: &Network) -> &'a [f64] {
        &self.pressures[..net.junction_count()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Continuity tolerance relative to `total demand + 1 cfs`.
    pub mass_tolerance: f64,
    /// Energy tolerance [ft].
    pub energy_tolerance: f64,
    pub max_step_halvings: usize,
    /// Largest flow update [cfs] of the last Newton step accepted at convergence.
    pub flow_step_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            mass_tolerance: 1e-8,
            energy_tolerance: 1e-8,
            max_step_halvings: 10,
            flow_step_tolerance: 1e-10,
        }
    }
}

/// Hazen-Williams resistance `4.727 C^-1.852 d^-4.871 L`.
pub fn pipe_resistance(pipe: &Pipe) -> f64 {
    HW_CONSTANT
        * pipe.roughness.powf(-HW_FLOW_EXPONENT)
        * pipe.diameter.powf(-HW_DIAMETER_EXPONENT)
        * pipe.length
}

/// Signed head loss [ft] along a pipe carrying `q` [cfs].
pub fn pipe_headloss(pipe: &Pipe, q: f64) -> f64 {
    power_loss(pipe_resistance(pipe), q).0
}

/// Pump head gain [ft]; see [`PumpCurve::head_gain`].
pub fn pump_headgain(pump: &crate::network::Pump, q: f64, speed: f64) -> f64 {
    pump.fitted.head_gain(q, speed)
}

/// `(r |Q|^0.852 Q, derivative)`, linear below [`ZERO_FLOW_THRESHOLD`].
fn power_loss(r: f64, q: f64) -> (f64, f64) {
    let a = q.abs();
    if a < ZERO_FLOW_THRESHOLD {
        let slope = r * ZERO_FLOW_THRESHOLD.powf(HW_FLOW_EXPONENT - 1.0);
        (slope * q, slope)
    } else {
        let loss = r * a.powf(HW_FLOW_EXPONENT);
        (loss.copysign(q), HW_FLOW_EXPONENT * loss / a)
    }
}

struct LinkModel {
    link: LinkRef,
    resistance: f64,
}

impl LinkModel {
    /// Head drop from `from` to `to` and its flow derivative.
    fn loss(&self, net: &Network, bc: &BoundaryConditions, q: f64) -> (f64, f64) {
        match self.link.kind {
            LinkKind::Pipe | LinkKind::Valve => power_loss(self.resistance, q),
            LinkKind::Pump => {
                let pump = &net.pumps[self.link.index];
                let speed = bc.pump_speeds[self.link.index];
                if q < 0.0 {
                    let shutoff = pump.fitted.head_gain(0.0, speed);
                    (-shutoff + PUMP_REVERSE_RESISTANCE * q, PUMP_REVERSE_RESISTANCE)
                } else {
                    let gain = pump.fitted.head_gain(q, speed);
                    let slope = -pump.fitted.head_gain_slope(q, speed);
                    (-gain, slope)
                }
            }
        }
    }

    fn initial_flow(&self, net: &Network, bc: &BoundaryConditions) -> f64 {
        let area = |d: f64| std::f64::consts::FRAC_PI_4 * d * d;
        match self.link.kind {
            LinkKind::Pipe => area(net.pipes[self.link.index].diameter),
            LinkKind::Valve => area(net.valves[self.link.index].diameter),
            LinkKind::Pump => net.pumps[self.link.index]
                .fitted
                .nominal_flow(bc.pump_speeds[self.link.index]),
        }
    }
}

fn link_models(net: &Network) -> Vec<LinkModel> {
    net.links()
        .map(|link| LinkModel {
            link,
            resistance: match link.kind {
                LinkKind::Pipe => pipe_resistance(&net.pipes[link.index]),
                LinkKind::Valve => VALVE_RESISTANCE,
                LinkKind::Pump => 0.0,
            },
        })
        .collect()
}

struct Residuals {
    mass: Vec<f64>,
    energy: Vec<f64>,
}

impl Residuals {
    fn merit(&self) -> f64 {
        self.mass.iter().chain(&self.energy).map(|r| r * r).sum()
    }

    fn max_mass(&self) -> f64 {
        self.mass.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn max_energy(&self) -> f64 {
        self.energy.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn residuals(
    net: &Network,
    bc: &BoundaryConditions,
    models: &[LinkModel],
    heads: &[f64],
    flows: &[f64],
) -> Residuals {
    let nj = net.junction_count();
    let mut mass: Vec<f64> = bc.demands.iter().map(|d| -d).collect();
    let mut energy = Vec::with_capacity(models.len());
    for (m, &q) in models.iter().zip(flows) {
        let (from, to) = (m.link.from, m.link.to);
        if to < nj {
            mass[to] += q;
        }
        if from < nj {
            mass[from] -= q;
        }
        energy.push(heads[from] - heads[to] - m.loss(net, bc, q).0);
    }
    Residuals { mass, energy }
}

/// Solves one steady state.
pub fn solve_steady_state(
    net: &Network,
    bc: &BoundaryConditions,
    opts: &SolverOptions,
) -> Result<HydraulicState> {
    bc.validate(net)?;
    if net.fixed_head_nodes.is_empty() {
        return Err(Error::SingularSystem("network has no fixed-head node".into()));
    }
    let nj = net.junction_count();
    let n = net.node_count();
    let models = link_models(net);

    let mut heads = vec![0.0; n];
    let mean_fixed = net.fixed_head_nodes.iter().map(|f| f.head).sum::<f64>()
        / net.fixed_head_nodes.len() as f64;
    for (i, h) in heads.iter_mut().enumerate() {
        *h = net.fixed_head(i).map_or(mean_fixed, |f| f.head);
    }
    let mut flows: Vec<f64> = models.iter().map(|m| m.initial_flow(net, bc)).collect();

    let total_demand: f64 = bc.demands.iter().sum();
    let mass_tol = opts.mass_tolerance * (total_demand + 1.0);
    let mut res = residuals(net, bc, &models, &heads, &flows);

    // near-zero flows in loops satisfy the energy tolerance long before they
    // settle, so convergence also needs a small last step
    let mut last_step = f64::INFINITY;
    for iteration in 0..=opts.max_iterations {
        if res.max_mass() <= mass_tol
            && res.max_energy() <= opts.energy_tolerance
            && last_step <= opts.flow_step_tolerance
        {
            let elevations = net.elevations();
            let pressures = heads.iter().zip(&elevations).map(|(h, z)| h - z).collect();
            return Ok(HydraulicState {
                heads,
                flows,
                pressures,
                iterations: iteration,
                mass_residual: res.max_mass(),
                energy_residual: res.max_energy(),
            });
        }
        if iteration == opts.max_iterations {
            break;
        }

        // assemble S G^-1 S^T dH = mass + S G^-1 energy over junction rows
        let mut system = DMatrix::<f64>::zeros(nj, nj);
        let mut rhs = DVector::from_column_slice(&res.mass);
        let mut inv_grad = Vec::with_capacity(models.len());
        for (k, m) in models.iter().enumerate() {
            let g = m.loss(net, bc, flows[k]).1.max(MIN_GRADIENT);
            let w = 1.0 / g;
            inv_grad.push(w);
            let (f, t) = (m.link.from, m.link.to);
            // incidence: +1 at `to`, -1 at `from`
            let e = res.energy[k] * w;
            if t < nj {
                system[(t, t)] += w;
                rhs[t] += e;
            }
            if f < nj {
                system[(f, f)] += w;
                rhs[f] -= e;
            }
            if t < nj && f < nj {
                system[(t, f)] -= w;
                system[(f, t)] -= w;
            }
        }
        let dh = system
            .cholesky()
            .ok_or_else(|| Error::SingularSystem("head system is not positive definite".into()))?
            .solve(&rhs);
        let node_dh = |i: usize| if i < nj { dh[i] } else { 0.0 };
        let dq: Vec<f64> = models
            .iter()
            .enumerate()
            .map(|(k, m)| (res.energy[k] + node_dh(m.link.from) - node_dh(m.link.to)) * inv_grad[k])
            .collect();

        let merit = res.merit();
        let mut step = 1.0;
        let mut trial_heads = heads.clone();
        let mut trial_flows = flows.clone();
        let mut trial = None;
        for _ in 0..=opts.max_step_halvings {
            for i in 0..nj {
                trial_heads[i] = heads[i] + step * dh[i];
            }
            for k in 0..flows.len() {
                trial_flows[k] = flows[k] + step * dq[k];
            }
            let r = residuals(net, bc, &models, &trial_heads, &trial_flows);
            let better = r.merit() <= merit;
            trial = Some(r);
            if better {
                break;
            }
            step *= 0.5;
        }
        last_step = step * dq.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        heads.copy_from_slice(&trial_heads);
        flows.copy_from_slice(&trial_flows);
        res = trial.expect("at least one trial step");
        if !res.merit().is_finite() {
            return Err(Error::NonConvergence {
                iterations: iteration + 1,
                residual: f64::INFINITY,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: res.max_mass().max(res.max_energy()),
    })
}

/// Per-link energy residual `H_from - H_to - loss(Q)` of a returned state.
pub fn energy_residuals(net: &Network, bc: &BoundaryConditions, state: &HydraulicState) -> Vec<f64> {
    let models = link_models(net);
    residuals(net, bc, &models, &state.heads, &state.flows).energy
}

/// Per-junction continuity residual `inflow - outflow - demand`.
pub fn mass_residuals(net: &Network, bc: &BoundaryConditions, state: &HydraulicState) -> Vec<f64> {
    let models = link_models(net);
    residuals(net, bc, &models, &state.heads, &state.flows).mass
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Successful scenes with their input index, in input order.
    pub states: Vec<(usize, HydraulicState)>,
    pub failures: Vec<SceneFailure>,
}

/// Solves every scene; failed scenes are reported with their index.
pub fn batch_solve(net: &Network, scenes: &[BoundaryConditions], opts: &SolverOptions) -> BatchResult {
    let results: Vec<Result<HydraulicState>> = scenes
        .par_iter()
        .map(|bc| solve_steady_state(net, bc, opts))
        .collect();
    let mut states = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => states.push((index, s)),
            Err(e) => {
                log::warn!("scene {index} failed: {e}");
                failures.push(SceneFailure {
                    index,
                    reason: e.to_string(),
                })
            }
        }
    }
    BatchResult { states, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    fn single_pipe(demand: f64) -> Network {
        NetworkBuilder::new()
            .junction("j", 0.0, demand)
            .reservoir("r", 100.0)
            .pipe("p", "r", "j", 1000.0, 1.0, 100.0)
            .build()
            .unwrap()
    }

    #[test]
    fn headloss_reference_values() {
        let pipe = &single_pipe(1.0).pipes[0];
        assert_eq!(pipe_headloss(pipe, 0.0), 0.0);
        let expected = 4.727 * 100f64.powf(-1.852) * 1000.0;
        assert!((pipe_headloss(pipe, 1.0) - expected).abs() < 1e-14);
        assert!((pipe_headloss(pipe, 1.0) - 0.934_513_548_880_876).abs() < 1e-12);
        for q in [1e-9, 1e-3, 0.7, 12.0] {
            assert_eq!(pipe_headloss(pipe, -q), -pipe_headloss(pipe, q));
        }
    }

    #[test]
    fn single_pipe_closed_form() {
        let net = single_pipe(1.0);
        let state = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default())
            .unwrap();
        let expected = 100.0 - 4.727 * 100f64.powf(-1.852) * 1000.0;
        assert!((state.heads[0] - expected).abs() < 1e-8);
        assert!((state.pressures[0] - expected).abs() < 1e-8);
        assert!((state.flows[0] - 1.0).abs() < 1e-10);
        assert_eq!(state.heads[1], 100.0);
    }

    #[test]
    fn zero_demand_is_hydrostatic() {
        let net = NetworkBuilder::new()
            .junction("a", 10.0, 0.0)
            .junction("b", 20.0, 0.0)
            .reservoir("r", 150.0)
            .pipe("p1", "r", "a", 500.0, 1.0, 120.0)
            .pipe("p2", "a", "b", 500.0, 0.5, 120.0)
            .pipe("p3", "r", "b", 800.0, 0.5, 120.0)
            .build()
            .unwrap();
        let s = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default())
            .unwrap();
        for h in &s.heads {
            assert!((h - 150.0).abs() < 1e-8);
        }
        for q in &s.flows {
            assert!(q.abs() < 1e-8, "{:?} after {}", s.flows, s.iterations);
        }
    }

    #[test]
    fn pump_lifts_head() {
        let net = NetworkBuilder::new()
            .junction("a", 0.0, 1.0)
            .reservoir("r", 0.0)
            .pump("u", "r", "a", vec![(1.0, 50.0)])
            .build()
            .unwrap();
        let s = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default())
            .unwrap();
        assert!((s.heads[0] - 50.0).abs() < 1e-8);
    }

    #[test]
    fn reverse_pump_flow_is_blocked() {
        // reservoir downstream is higher than the pump's shutoff head
        let net = NetworkBuilder::new()
            .junction("a", 0.0, 0.0)
            .reservoir("low", 0.0)
            .reservoir("high", 100.0)
            .pump("u", "low", "a", vec![(1.0, 30.0)])
            .pipe("p", "a", "high", 100.0, 1.0, 100.0)
            .build()
            .unwrap();
        let s = solve_steady_state(&net, &BoundaryConditions::nominal(&net), &SolverOptions::default())
            .unwrap();
        assert!(s.flows[0].abs() < 1e-4, "pump flow {}", s.flows[0]);
        assert!((s.heads[0] - 100.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_invalid_boundaries() {
        let net = single_pipe(1.0);
        let bad = BoundaryConditions {
            demands: vec![-1.0],
            pump_speeds: vec![],
        };
        assert!(matches!(
            solve_steady_state(&net, &bad, &SolverOptions::default()),
            Err(Error::InvalidBoundary(_))
        ));
        let short = BoundaryConditions {
            demands: vec![],
            pump_speeds: vec![],
        };
        assert!(matches!(
            solve_steady_state(&net, &short, &SolverOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_reports_failures_by_index() {
        let net = single_pipe(1.0);
        let good = BoundaryConditions::nominal(&net);
        let bad = BoundaryConditions {
            demands: vec![f64::NAN],
            pump_speeds: vec![],
        };
        let out = batch_solve(&net, std::slice::from_ref(&good), &SolverOptions::default());
        assert_eq!(out.states.len(), 1);
        let out = batch_solve(&net, &[bad, good], &SolverOptions::default());
        assert_eq!(out.states.len(), 1);
        assert_eq!(out.states[0].0, 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].index, 0);
    }
}
