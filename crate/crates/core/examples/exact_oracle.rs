//! The exact oracle on a two-datacenter instance small enough to check by
//! hand, then re-verified from scratch.

use greenshift::energy::{Datacenter, EnergyModel, VmId, VmRequest};
use greenshift::exact::{solve_exact, verify_solution, ExactInstance, ExactLimits};
use greenshift::heuristics::NetworkParams;
use greenshift::spectrum::SpectrumGrid;
use greenshift::topology::{NodeId, Topology, TopologySpec};

fn main() {
    let topo = Topology::from_spec(&TopologySpec {
        name: Some("pair".into()),
        nodes: vec![1, 2, 3],
        links: vec![(1, 2, 500.0), (1, 3, 400.0), (3, 2, 400.0)],
        slot_capacity: 12,
        dc_nodes: vec![1, 2],
    })
    .expect("valid topology");
    let vm = |id, home, cores, gbps| VmRequest { id: VmId(id), home_dc: NodeId(home), cores, bandwidth_gbps: gbps, migrated_to: None };
    let requests = vec![vm(1, 1, 4, 10.0), vm(2, 1, 6, 14.5), vm(3, 2, 2, 3.0)];
    // DC 1 runs on grid power only; DC 2 has renewable power to spare.
    let mut dcs = vec![Datacenter::new(NodeId(1), 1, 16, 12.0, 0.1, 0.0), Datacenter::new(NodeId(2), 1, 16, 9.0, 0.1, 260.0)];
    for dc in &mut dcs {
        let here: Vec<&VmRequest> = requests.iter().filter(|r| r.home_dc == dc.id).collect();
        dc.place_vms(&here).expect("fits");
    }
    let params = NetworkParams { k_paths: 2, h_max: Some(2), umax: 1.0, ..NetworkParams::default() };
    let inst = ExactInstance::new(
        &topo,
        SpectrumGrid::for_topology(&topo, params.slot_rate_gbps),
        dcs,
        requests,
        EnergyModel::default(),
        params,
    );
    let sol = solve_exact(&inst, ExactLimits::default());
    println!("status {:?} after {} nodes", sol.status, sol.explored_nodes);
    println!("no migration {:.3}, optimum {:.3} (brown {:.3})", sol.obj_no_migration, sol.obj, sol.obj2);
    for b in &sol.batches {
        println!("  {} -> {} via {} carrying {:?} in slots {}", b.source, b.dest, b.path, b.vms, b.slot_range);
    }
    let problems = verify_solution(&inst, &sol);
    println!("independent check: {}", if problems.is_empty() { "ok".to_string() } else { problems.join("; ") });
}
