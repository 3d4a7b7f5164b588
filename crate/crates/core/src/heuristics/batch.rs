use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Datacenter, DcId, EnergyModel, VmId, VmRequest};
use crate::spectrum::{slots_for_bandwidth, SpectrumGrid};
use crate::topology::{modulation_level, ModulationTable, Path};

/// A packed batch before spectrum allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub source: DcId,
    pub dest: DcId,
    pub vms: Vec<VmId>,
    pub theta_gbps: f64,
    pub level: u8,
    /// Payload slots, without guard.
    pub width: usize,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BatchError {
    #[error("no candidate VM fits the batch")]
    Empty,
}

/// Packs `candidates` (already in ascending bandwidth order) into one
/// batch from `source` to `dest` over `path`.
///
/// Stops at the first VM that would push `θ` past `κ·L(p)`. VMs the
/// destination cannot take (cores, or renewable headroom) are skipped.
/// Packing ends once the source would no longer draw brown power.
#[allow(clippy::too_many_arguments)]
pub fn build_batch(
    source: &Datacenter,
    dest: &Datacenter,
    candidates: &[&VmRequest],
    path: &Path,
    kappa_gbps: f64,
    modulation: &ModulationTable,
    slot_rate_gbps: f64,
    model: &EnergyModel,
) -> Result<BatchPlan, BatchError> {
    let level = modulation_level(path, modulation);
    let cap = kappa_gbps * f64::from(level);
    let mut packed: Vec<&VmRequest> = Vec::new();
    let mut theta = 0.0;
    for &vm in candidates {
        if theta + vm.bandwidth_gbps > cap + 1e-9 {
            break;
        }
        packed.push(vm);
        let fits = dest
            .power_with(model, &packed)
            .is_some_and(|p| p <= dest.renewable_budget + 1e-9);
        if !fits {
            packed.pop();
            continue;
        }
        theta += vm.bandwidth_gbps;
        let left = source.power_without(model, &packed).expect("candidates are hosted at the source");
        if left <= source.renewable_budget {
            break;
        }
    }
    if packed.is_empty() {
        return Err(BatchError::Empty);
    }
    Ok(BatchPlan {
        source: source.id,
        dest: dest.id,
        vms: packed.iter().map(|v| v.id).collect(),
        theta_gbps: theta,
        level,
        width: slots_for_bandwidth(theta, level, slot_rate_gbps),
    })
}

/// `W(p, d) = A(p)/H(p) · Σ_n (1 − u_n)·φ`.
pub fn weight_jre(path: &Path, dest: &Datacenter, grid: &SpectrumGrid, umax: f64) -> f64 {
    weight_ep(path, grid, umax) * dest.spare_cores()
}

/// `W(p) = A(p)/H(p)`.
pub fn weight_ep(path: &Path, grid: &SpectrumGrid, umax: f64) -> f64 {
    grid.available_contiguous_bandwidth(path, umax) as f64 / path.hops() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeId, Topology, TopologySpec};

    fn line3() -> Topology {
        Topology::from_spec(&TopologySpec {
            name: None,
            nodes: vec![1, 2, 3],
            links: vec![(1, 2, 100.0), (2, 3, 100.0)],
            slot_capacity: 300,
            dc_nodes: vec![1, 3],
        })
        .unwrap()
    }

    fn vm(id: u32, cores: u32, sigma: f64) -> VmRequest {
        VmRequest { id: VmId(id), home_dc: NodeId(1), cores, bandwidth_gbps: sigma, migrated_to: None }
    }

    fn setup(vms: &[VmRequest], dest_servers: usize) -> (Datacenter, Datacenter) {
        let mut src = Datacenter::new(NodeId(1), 1, 16, 10.0, 0.1, 0.0);
        src.place_vms(&vms.iter().collect::<Vec<_>>()).unwrap();
        let dest = Datacenter::new(NodeId(3), dest_servers, 16, 10.0, 0.1, 1e6);
        (src, dest)
    }

    #[test]
    fn packs_in_order_until_kappa() {
        let vms = [vm(1, 1, 2.0), vm(2, 1, 5.0), vm(3, 1, 10.0), vm(4, 1, 95.0)];
        let (src, dest) = setup(&vms, 1);
        let t = line3();
        let path = Path::from_nodes(&t, &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let refs: Vec<&VmRequest> = vms.iter().collect();
        let plan = build_batch(&src, &dest, &refs, &path, 100.0, &ModulationTable::default(), 12.5, &EnergyModel::default())
            .unwrap();
        assert_eq!(plan.vms, vec![VmId(1), VmId(2), VmId(3)]);
        assert_eq!(plan.theta_gbps, 17.0);
        assert_eq!(plan.width, 2);
    }

    #[test]
    fn oversized_vm_gives_empty() {
        let vms = [vm(1, 1, 120.0)];
        let (src, dest) = setup(&vms, 1);
        let t = line3();
        let path = Path::from_nodes(&t, &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let refs: Vec<&VmRequest> = vms.iter().collect();
        let r = build_batch(&src, &dest, &refs, &path, 100.0, &ModulationTable::default(), 12.5, &EnergyModel::default());
        assert_eq!(r, Err(BatchError::Empty));
    }

    #[test]
    fn cpu_bound_dest_gives_empty() {
        let vms = [vm(1, 2, 5.0), vm(2, 2, 6.0)];
        let (src, mut dest) = setup(&vms, 1);
        dest.place_vms(&[&VmRequest { id: VmId(99), home_dc: NodeId(3), cores: 15, bandwidth_gbps: 1.0, migrated_to: None }])
            .unwrap();
        let t = line3();
        let path = Path::from_nodes(&t, &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let refs: Vec<&VmRequest> = vms.iter().collect();
        let r = build_batch(&src, &dest, &refs, &path, 100.0, &ModulationTable::default(), 12.5, &EnergyModel::default());
        assert_eq!(r, Err(BatchError::Empty));
    }

    #[test]
    fn weights_on_idle_grid() {
        let t = line3();
        let grid = SpectrumGrid::for_topology(&t, 12.5);
        let path = Path::from_nodes(&t, &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let idle = Datacenter::new(NodeId(3), 1, 16, 10.0, 0.1, 0.0);
        assert_eq!(weight_jre(&path, &idle, &grid, 1.0), 2400.0);
        assert_eq!(weight_ep(&path, &grid, 1.0), 150.0);
        let mut full = idle.clone();
        full.place_vms(&[&vm(9, 16, 1.0)]).unwrap();
        assert_eq!(weight_jre(&path, &full, &grid, 1.0), 0.0);
    }
}
