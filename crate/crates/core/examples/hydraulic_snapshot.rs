//! Solves one steady state at base demand and again at a doubled demand,
//! then prints the lowest pressures.

use wdsgnn::hydraulics::{solve_steady_state, BoundaryConditions, SolverOptions};
use wdsgnn::network::Network;

fn main() -> wdsgnn::Result<()> {
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let opts = SolverOptions::default();
    let base = BoundaryConditions::nominal(&net);
    let mut peak = base.clone();
    peak.demands.iter_mut().for_each(|d| *d *= 2.0);

    for (label, bc) in [("base", &base), ("2x demand", &peak)] {
        let state = solve_steady_state(&net, bc, &opts)?;
        let mut p: Vec<(f64, &str)> = state
            .junction_pressures(&net)
            .iter()
            .zip(net.node_names())
            .map(|(p, n)| (*p, n.as_str()))
            .collect();
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        println!(
            "{label}: {} iterations, mass residual {:.1e} cfs, energy residual {:.1e} ft",
            state.iterations, state.mass_residual, state.energy_residual
        );
        for (pressure, name) in p.iter().take(3) {
            println!("  {name:<6} {pressure:7.2} ft");
        }
    }
    Ok(())
}
