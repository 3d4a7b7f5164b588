//! One migration cycle on NSFNET at desk scale: draw a scenario, run JRE,
//! print each committed batch and the cost split.

use greenshift::heuristics::{run_cycle, Algorithm, NetworkParams};
use greenshift::spectrum::SpectrumGrid;
use greenshift::topology::preset;
use greenshift::workload::{generate_requests, ScenarioConfig};

fn main() {
    let topo = preset("nsfnet").expect("embedded preset");
    let config = ScenarioConfig { requests_per_dc: 40.0, servers_per_dc: 10, seed: 7, ..ScenarioConfig::default() };
    let draw = generate_requests(&config, topo.dc_nodes()).expect("valid scenario");
    let params = NetworkParams { umax: 0.5, ..NetworkParams::default() };
    let out = run_cycle(
        &topo,
        SpectrumGrid::for_topology(&topo, params.slot_rate_gbps),
        &draw,
        &config.energy_model(),
        &params,
        Algorithm::Jre,
    );
    println!("{} VMs drawn over {} datacenters", draw.requests.len(), draw.dcs.len());
    for b in &out.log.batches {
        println!(
            "batch {:>2}: {} -> {} via {:<16} {} VMs, {:>6.2} Gbps, slots {}",
            b.index,
            b.source,
            b.dest,
            b.path.to_string(),
            b.vms.len(),
            b.theta_gbps,
            b.slot_range
        );
    }
    let r = &out.report;
    println!("brown cost {:.1} -> {:.1} (relaxed bound {:.1})", r.obj2_before, r.obj2, r.relaxed_obj2);
    println!("objective {:.1}, {} batches, {} VMs, {} blocked, {:?}", r.obj, r.migrations, r.migrated_vms, r.blocked, out.runtime);
}
