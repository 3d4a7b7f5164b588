use std::collections::{BTreeMap, BTreeSet};

use super::{ExactInstance, ExactSolution};
use crate::energy::{DcId, VmId};
use crate::spectrum::{audit, slots_for_bandwidth};
use crate::topology::{k_shortest_paths, modulation_level};

const TOL: f64 = 1e-6;

/// Re-checks a solution from scratch using only the spectrum and energy
/// validators. Returns one message per violated constraint.
pub fn verify_solution(inst: &ExactInstance, sol: &ExactSolution) -> Vec<String> {
    let mut out = Vec::new();
    let p = &inst.params;
    let requests: BTreeMap<VmId, _> = inst.requests.iter().map(|r| (r.id, r)).collect();
    let dc_ids: BTreeSet<DcId> = inst.dcs.iter().map(|d| d.id).collect();
    let mut location: BTreeMap<VmId, DcId> = requests.iter().map(|(id, r)| (*id, r.home_dc)).collect();
    let mut moved = BTreeSet::new();
    let mut per_source: BTreeMap<DcId, usize> = BTreeMap::new();
    let mut grid = inst.grid.clone();
    let mut migration = 0.0;

    for b in &sol.batches {
        let tag = format!("batch {} ({} -> {})", b.index, b.source, b.dest);
        if !dc_ids.contains(&b.source) || !dc_ids.contains(&b.dest) || b.source == b.dest {
            out.push(format!("{tag}: endpoints must be two distinct datacenters"));
            continue;
        }
        if b.vms.is_empty() {
            out.push(format!("{tag}: carries no VM"));
        }
        let mut theta = 0.0;
        for v in &b.vms {
            match requests.get(v) {
                None => out.push(format!("{tag}: unknown {v}")),
                Some(r) => {
                    if r.home_dc != b.source {
                        out.push(format!("{tag}: {v} is not hosted at the source"));
                    }
                    if !moved.insert(*v) {
                        out.push(format!("{tag}: {v} migrated twice"));
                    }
                    location.insert(*v, b.dest);
                    theta += r.bandwidth_gbps;
                }
            }
        }
        if (theta - b.theta_gbps).abs() > TOL {
            out.push(format!("{tag}: theta {} differs from carried bandwidth {theta}", b.theta_gbps));
        }
        let count = per_source.entry(b.source).or_default();
        *count += 1;
        if *count > inst.batch_limit(b.source) {
            out.push(format!("{tag}: source exceeds its batch limit"));
        }
        if b.path.source() != b.source || b.path.target() != b.dest {
            out.push(format!("{tag}: path {} does not join the endpoints", b.path));
        }
        if !k_shortest_paths(inst.topo, b.source, b.dest, p.k_paths).contains(&b.path) {
            out.push(format!("{tag}: path {} is not a candidate path", b.path));
        }
        let level = modulation_level(&b.path, &p.modulation);
        if theta > p.kappa_gbps * f64::from(level) + TOL {
            out.push(format!("{tag}: theta {theta} exceeds the per-batch cap"));
        }
        let width = slots_for_bandwidth(theta, level, p.slot_rate_gbps);
        if b.slot_range.width != width || b.slot_range.guard != p.guard_slots {
            out.push(format!("{tag}: slot range {} should be {width} payload + {} guard", b.slot_range, p.guard_slots));
        }
        if let Err(e) = grid.allocate_at(&b.path, b.slot_range, p.umax) {
            out.push(format!("{tag}: spectrum rejected: {e}"));
        }
        let beta = inst.dcs.iter().find(|d| d.id == b.source).map_or(0.0, |d| d.migration_price);
        migration += beta * (b.theta_gbps + 1.0);
    }
    let lightpaths: Vec<_> = sol.batches.iter().map(|b| b.lightpath()).collect();
    out.extend(audit(&grid, &lightpaths, p.guard_slots, p.umax).iter().map(|v| format!("rsa: {v}")));

    let mut obj2 = 0.0;
    for dc in &inst.dcs {
        let items: Vec<u32> = location
            .iter()
            .filter(|(_, at)| **at == dc.id)
            .map(|(v, _)| requests[v].cores)
            .collect();
        match inst.model.best_power(&items, dc.num_servers(), dc.cores_per_server) {
            Some(power) => obj2 += dc.energy_price * (power - dc.renewable_budget).max(0.0),
            None => out.push(format!("{}: hosted VMs do not fit its servers", dc.id)),
        }
    }
    let claimed: BTreeMap<VmId, DcId> = sol.placement.iter().copied().collect();
    if claimed != location {
        out.push("placement does not match the batches".to_string());
    }
    if (obj2 - sol.obj2).abs() > TOL * obj2.abs().max(1.0) {
        out.push(format!("obj2 {} recomputes to {obj2}", sol.obj2));
    }
    let obj = obj2 + migration;
    if (obj - sol.obj).abs() > TOL * obj.abs().max(1.0) {
        out.push(format!("obj {} recomputes to {obj}", sol.obj));
    }
    out
}
