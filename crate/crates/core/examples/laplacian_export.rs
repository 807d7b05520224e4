//! Builds the scaled Laplacian under all three edge weightings and writes
//! them as dense CSV with a JSON header.

use wdsgnn::network::Network;
use wdsgnn::spectral::{dense_eigenvalues, LambdaMaxMethod, ScaledLaplacian, WeightScheme};

fn main() -> wdsgnn::Result<()> {
    let net = Network::from_inp_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp"))?;
    let out = std::env::temp_dir().join("wdsgnn-laplacian");
    for scheme in WeightScheme::ALL {
        let lap = ScaledLaplacian::from_network(&net, scheme, LambdaMaxMethod::Exact)?;
        let ev = dense_eigenvalues(lap.matrix());
        println!(
            "{scheme:<12} lambda_max {:.6}  spectrum [{:+.6}, {:+.6}]  diagonal mass {:.3}",
            lap.lambda_max(),
            ev[0],
            ev[ev.len() - 1],
            lap.diagonal_mass_fraction()
        );
        lap.export(&out, scheme.as_str(), net.node_names())?;
    }
    println!("written to {}", out.display());
    Ok(())
}
