//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use greenshift::energy::{Datacenter, EnergyModel, VmId, VmRequest};
use greenshift::exact::ExactInstance;
use greenshift::heuristics::NetworkParams;
use greenshift::spectrum::SpectrumGrid;
use greenshift::topology::{NodeId, Topology, TopologySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod rsa;

pub fn topology(nodes: &[u32], links: &[(u32, u32, f64)], dc_nodes: &[u32], slot_capacity: usize) -> Topology {
    Topology::from_spec(&TopologySpec {
        name: None,
        nodes: nodes.to_vec(),
        links: links.to_vec(),
        slot_capacity,
        dc_nodes: dc_nodes.to_vec(),
    })
    .unwrap()
}

pub fn vm(id: u32, home: u32, cores: u32, sigma: f64) -> VmRequest {
    VmRequest { id: VmId(id), home_dc: NodeId(home), cores, bandwidth_gbps: sigma, migrated_to: None }
}

/// Hosts every request at its home datacenter.
pub fn host(dcs: &mut [Datacenter], requests: &[VmRequest]) {
    for dc in dcs.iter_mut() {
        let here: Vec<&VmRequest> = requests.iter().filter(|r| r.home_dc == dc.id).collect();
        dc.place_vms(&here).unwrap();
    }
}

/// A random tiny instance: 2 or 3 single-server datacenters, at most two
/// requests each, K = 2, `c_e` in 10..=20, one batch per source, optional
/// background traffic and congestion cap.
pub struct Tiny {
    pub topo: Topology,
    pub grid: SpectrumGrid,
    pub dcs: Vec<Datacenter>,
    pub requests: Vec<VmRequest>,
    pub model: EnergyModel,
    pub params: NetworkParams,
}

impl Tiny {
    pub fn instance(&self) -> ExactInstance<'_> {
        ExactInstance::new(&self.topo, self.grid.clone(), self.dcs.clone(), self.requests.clone(), self.model, self.params.clone())
    }
}

pub fn tiny(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let three = rng.random_bool(0.5);
    let c_e = rng.random_range(10..=20);
    let len = |rng: &mut ChaCha8Rng| rng.random_range(100.0..1500.0_f64).round();
    let topo = if three {
        // Four-node ring with a chord, DCs on three of the nodes.
        let links = [(1, 2, len(&mut rng)), (2, 3, len(&mut rng)), (3, 4, len(&mut rng)), (4, 1, len(&mut rng)), (1, 3, len(&mut rng))];
        topology(&[1, 2, 3, 4], &links, &[1, 2, 3], c_e)
    } else {
        let links = [(1, 2, len(&mut rng)), (1, 3, len(&mut rng)), (3, 2, len(&mut rng))];
        topology(&[1, 2, 3], &links, &[1, 2], c_e)
    };
    let model = EnergyModel::default();
    let mut dcs = Vec::new();
    let mut requests = Vec::new();
    for &node in topo.dc_nodes() {
        let count = rng.random_range(0..=2);
        let mut cores_total = 0;
        for j in 0..count {
            let cores = rng.random_range(1..=8);
            cores_total += cores;
            let sigma = rng.random_range(2.0..20.0_f64);
            requests.push(vm(node.0 * 100 + j, node.0, cores, (sigma * 4.0).round() / 4.0));
        }
        let power = model.power.server_power(cores_total, 16);
        let xi = rng.random_range(0.0..1.3) * power;
        let alpha = rng.random_range(9.0..15.0);
        dcs.push(Datacenter::new(node, 1, 16, alpha, 0.1, xi));
    }
    host(&mut dcs, &requests);
    let mut grid = SpectrumGrid::for_topology(&topo, 12.5);
    if rng.random_bool(0.5) {
        let fraction = rng.random_range(0.0..0.4);
        grid.fill_background(&mut rng, fraction, 3);
    }
    let umax = [0.4, 0.6, 0.8, 1.0][rng.random_range(0..4)];
    let params = NetworkParams { k_paths: 2, h_max: Some(1), umax, ..NetworkParams::default() };
    Tiny { topo, grid, dcs, requests, model, params }
}
