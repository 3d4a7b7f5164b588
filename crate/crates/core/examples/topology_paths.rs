//! K shortest paths between every pair of NSFNET datacenters, with the
//! modulation level each path would use.

use greenshift::heuristics::NetworkParams;
use greenshift::topology::{k_shortest_paths, modulation_level, preset};

fn main() {
    let topo = preset("nsfnet").expect("embedded preset");
    let params = NetworkParams::default();
    println!(
        "{}: {} nodes, {} links, {} slots per link, DCs at {:?}",
        topo.name(),
        topo.nodes().len(),
        topo.links().len(),
        topo.slot_capacity(),
        topo.dc_nodes().iter().map(|n| n.0).collect::<Vec<_>>()
    );
    let dcs = topo.dc_nodes();
    for (i, &s) in dcs.iter().enumerate() {
        for &d in &dcs[i + 1..] {
            println!("{s} -> {d}");
            for p in k_shortest_paths(&topo, s, d, params.k_paths) {
                let level = modulation_level(&p, &params.modulation);
                println!("  {:<24} {:>6.0} km  {} hops  L={level}", p.to_string(), p.length_km(), p.hops());
            }
        }
    }
}
