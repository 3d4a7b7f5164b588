//! Builds the migration ILP for a two-datacenter instance and writes it in
//! LP format, alongside the oracle's optimum for comparison with an
//! external MILP solver.
//!
//! cargo run --example export_lp -- /tmp/two_dc.lp
//! highs /tmp/two_dc.lp

use greenshift::energy::{Datacenter, EnergyModel, VmId, VmRequest};
use greenshift::exact::{build_ilp, export_lp, solve_exact, ExactInstance, ExactLimits, VarFamily};
use greenshift::heuristics::NetworkParams;
use greenshift::spectrum::SpectrumGrid;
use greenshift::topology::{NodeId, Topology, TopologySpec};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "two_dc.lp".into());
    let topo = Topology::from_spec(&TopologySpec {
        name: Some("two-dc".into()),
        nodes: vec![1, 2],
        links: vec![(1, 2, 500.0)],
        slot_capacity: 20,
        dc_nodes: vec![1, 2],
    })
    .expect("valid topology");
    let requests = vec![VmRequest { id: VmId(1), home_dc: NodeId(1), cores: 4, bandwidth_gbps: 10.0, migrated_to: None }];
    let mut dcs = vec![Datacenter::new(NodeId(1), 2, 16, 10.0, 0.1, 0.0), Datacenter::new(NodeId(2), 2, 16, 10.0, 0.1, 1000.0)];
    dcs[0].place_vms(&[&requests[0]]).expect("fits");
    let params = NetworkParams { k_paths: 1, h_max: Some(1), ..NetworkParams::default() };
    let inst = ExactInstance::new(
        &topo,
        SpectrumGrid::for_topology(&topo, params.slot_rate_gbps),
        dcs,
        requests,
        EnergyModel::default(),
        params,
    );
    let model = build_ilp(&inst, 100_000).expect("small model");
    std::fs::write(&out, export_lp(&model)).expect("writable output path");
    println!("{} variables ({} binary delta), {} rows -> {out}", model.variables.len(), model.count(VarFamily::Delta), model.rows.len());
    let sol = solve_exact(&inst, ExactLimits::default());
    println!("oracle optimum {:.6}; an external solver should report the same", sol.obj);
}
