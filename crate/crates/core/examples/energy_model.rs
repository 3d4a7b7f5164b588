//! Server power, first-fit-decreasing placement and brown energy for one
//! datacenter, under both static power accountings.

use greenshift::energy::{
    server_power, Datacenter, EnergyModel, PowerParams, StaticPowerMode, VmId, VmRequest,
};
use greenshift::topology::NodeId;

fn main() {
    let power = PowerParams::default();
    println!("idle {} W, peak {} W, PUE {}", power.idle_w, power.peak_w, power.pue);
    for cores in [0, 4, 8, 16] {
        println!("  server with {cores:>2}/16 cores busy: {:.1} W", server_power(&power, cores, 16));
    }

    let vms: Vec<VmRequest> = [3, 2, 3, 1, 2, 3, 1]
        .iter()
        .enumerate()
        .map(|(i, &cores)| VmRequest {
            id: VmId(i as u32),
            home_dc: NodeId(1),
            cores,
            bandwidth_gbps: 10.0,
            migrated_to: None,
        })
        .collect();
    for mode in [StaticPowerMode::AllServers, StaticPowerMode::ActiveServers] {
        let model = EnergyModel { power, static_mode: mode };
        let mut dc = Datacenter::new(NodeId(1), 4, 16, 12.0, 0.1, 300.0);
        dc.place_vms(&vms.iter().collect::<Vec<_>>()).expect("fits");
        let used: Vec<u32> = dc.servers.iter().map(|s| s.used_cores).collect();
        println!(
            "{mode:?}: cores per server {used:?}, power {:.1} W, renewable {} W, brown {:.1} W, cost {:.1}",
            dc.power(&model),
            dc.renewable_budget,
            dc.brown_energy(&model),
            dc.energy_price * dc.brown_energy(&model)
        );
    }
}
