//! Parses an INP file and prints its size, graph diameter and a few nodes.
//!
//!     cargo run --example parse_network -- data/networks/richmond.inp

use wdsgnn::network::Network;

fn main() -> wdsgnn::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks/anytown.inp").into());
    let net = Network::from_inp_file(&path)?;
    let s = net.summary();
    println!("{}", s.title);
    println!(
        "{} junctions, {} tanks/reservoirs, {} pipes, {} pumps, {} valves",
        s.junctions, s.fixed_head_nodes, s.pipes, s.pumps, s.valves
    );
    println!("graph diameter {} hops", s.diameter);
    for node in s.nodes.iter().take(5) {
        println!("  {:<8} {:<10} elevation {:8.2} ft", node.name, node.kind, node.elevation);
    }
    Ok(())
}
