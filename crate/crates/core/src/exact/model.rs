use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExactInstance, ExactSolution};
use crate::energy::{pack_exact, DcId, StaticPowerMode, VmId};
use crate::spectrum::{slots_for_bandwidth, CongestionAccounting};
use crate::topology::{k_shortest_paths, modulation_level, paths_share_link, Path};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

/// Which family of the formulation a column belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarFamily {
    /// Request kept on a home server.
    X,
    /// Request migrated out.
    Z,
    /// Request migrated onto a remote server.
    Omega,
    /// Path chosen for a batch.
    Y,
    /// Batch bandwidth between two datacenters, in slots.
    Theta,
    /// Slots on a path for a batch.
    B,
    /// First slot on a path for a batch.
    F,
    /// Start-order indicator for two lightpaths sharing a link.
    Delta,
    /// Brown power of a datacenter.
    Phi,
    /// Server switched on (only when idle servers are off).
    Active,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub family: VarFamily,
    pub upper: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    /// Number of the formulation constraint this row comes from.
    pub tag: u8,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IlpError {
    #[error("model needs {rows} rows, budget is {budget}")]
    TooLarge { rows: usize, budget: usize },
}

/// The complete integer program of one migration cycle. Spectrum
/// quantities are in slots of the base slot rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlpModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub f_max: usize,
    /// Constant used where the ordering rows need slack beyond `f_max`.
    pub big_m: f64,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// One candidate lightpath column group `(d, h, p)`.
struct Lane {
    d: usize,
    h: usize,
    m: usize,
    k: usize,
    path: Path,
    level: u8,
    y: usize,
    b: usize,
    f: usize,
}

struct Builder {
    model: IlpModel,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, family: VarFamily, upper: Option<f64>) -> usize {
        let id = self.model.variables.len();
        self.model.index.insert(name.clone(), id);
        self.model.variables.push(Variable { name, kind, family, upper });
        id
    }

    fn row(&mut self, tag: u8, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.model.rows.push(Row { name, tag, terms, sense, rhs });
    }
}

/// Builds the integer program for `inst`. Fails if it would need more than
/// `row_budget` rows.
pub fn build_ilp(inst: &ExactInstance, row_budget: usize) -> Result<IlpModel, IlpError> {
    let p = &inst.params;
    let dcs = &inst.dcs;
    let n = dcs.len();
    let mut reqs = inst.requests.clone();
    reqs.sort_by_key(|r| r.id);
    let home: Vec<usize> = reqs
        .iter()
        .map(|r| dcs.iter().position(|d| d.id == r.home_dc).expect("request homed at a known datacenter"))
        .collect();
    let c_e = inst.grid.slot_capacity() as f64;
    let c_f = p.slot_rate_gbps;
    let guard = p.guard_slots;
    let counted_guard = match inst.grid.accounting() {
        CongestionAccounting::IncludeGuard => guard as f64,
        CongestionAccounting::PayloadOnly => 0.0,
    };
    let f_max = reqs.iter().map(|r| slots_for_bandwidth(r.bandwidth_gbps, 1, c_f)).sum::<usize>() + guard * reqs.len();
    let fm = f_max as f64;
    let big_m = c_e + fm;
    let pw = inst.model.power;
    let static_w = pw.static_power();
    let active = inst.model.static_mode == StaticPowerMode::ActiveServers;

    let mut bld = Builder {
        model: IlpModel {
            variables: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            f_max,
            big_m,
            index: BTreeMap::new(),
        },
    };
    let dc = |m: usize| dcs[m].id.0;

    // Columns.
    let phi: Vec<usize> = (0..n)
        .map(|m| bld.var(format!("Phi_m{}", dc(m)), VarKind::Continuous, VarFamily::Phi, None))
        .collect();
    let mut x: Vec<Vec<usize>> = Vec::new();
    let mut z: Vec<usize> = Vec::new();
    let mut omega: Vec<Vec<Vec<usize>>> = Vec::new();
    for (i, r) in reqs.iter().enumerate() {
        let hm = home[i];
        x.push(
            (1..=dcs[hm].num_servers())
                .map(|s| bld.var(format!("x_m{}_n{s}_i{}", dc(hm), r.id.0), VarKind::Binary, VarFamily::X, None))
                .collect(),
        );
        z.push(bld.var(format!("z_d{}_i{}", dc(hm), r.id.0), VarKind::Binary, VarFamily::Z, None));
        omega.push(
            (0..n)
                .map(|m| {
                    if m == hm {
                        return Vec::new();
                    }
                    (1..=dcs[m].num_servers())
                        .map(|s| bld.var(format!("w_m{}_n{s}_i{}", dc(m), r.id.0), VarKind::Binary, VarFamily::Omega, None))
                        .collect()
                })
                .collect(),
        );
    }
    let routes: Vec<Vec<Vec<Path>>> = (0..n)
        .map(|d| {
            (0..n)
                .map(|m| if d == m { Vec::new() } else { k_shortest_paths(inst.topo, dcs[d].id, dcs[m].id, p.k_paths) })
                .collect()
        })
        .collect();
    let limits: Vec<usize> = (0..n).map(|d| inst.batch_limit(dcs[d].id)).collect();
    let mut lanes: Vec<Lane> = Vec::new();
    let mut theta: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for d in 0..n {
        for h in 1..=limits[d] {
            for m in (0..n).filter(|&m| m != d) {
                let t = bld.var(format!("t_d{}_m{}_h{h}", dc(d), dc(m)), VarKind::Integer, VarFamily::Theta, Some(fm));
                theta.insert((d, m, h), t);
                for (k, path) in routes[d][m].iter().enumerate() {
                    let label = format!("d{}_h{h}_m{}_k{}", dc(d), dc(m), k + 1);
                    let y = bld.var(format!("y_{label}"), VarKind::Binary, VarFamily::Y, None);
                    let b = bld.var(format!("b_{label}"), VarKind::Integer, VarFamily::B, Some(fm));
                    let f = bld.var(format!("f_{label}"), VarKind::Integer, VarFamily::F, Some(fm));
                    let level = modulation_level(path, &p.modulation);
                    lanes.push(Lane { d, h, m, k, path: path.clone(), level, y, b, f });
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for a in 0..lanes.len() {
        for b in a + 1..lanes.len() {
            let (la, lb) = (&lanes[a], &lanes[b]);
            if (la.d, la.h) != (lb.d, lb.h) && paths_share_link(&la.path, &lb.path) {
                let name = format!(
                    "dl_d{}_h{}_m{}_k{}_d{}_h{}_m{}_k{}",
                    dc(la.d),
                    la.h,
                    dc(la.m),
                    la.k + 1,
                    dc(lb.d),
                    lb.h,
                    dc(lb.m),
                    lb.k + 1
                );
                let v = bld.var(name, VarKind::Binary, VarFamily::Delta, None);
                pairs.push((a, b, v));
            }
        }
    }
    let act: Vec<Vec<usize>> = if active {
        (0..n)
            .map(|m| {
                (1..=dcs[m].num_servers())
                    .map(|s| bld.var(format!("a_m{}_n{s}", dc(m)), VarKind::Binary, VarFamily::Active, None))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };

    let lane_rows = lanes.len() * 4;
    let estimate = 2 * reqs.len()
        + dcs.iter().map(|d| d.num_servers()).sum::<usize>() * if active { 1 + reqs.len() } else { 1 }
        + 2 * n
        + theta.len() * 3
        + n * n
        + lane_rows
        + pairs.len() * 4
        + lanes.len();
    if estimate > row_budget {
        return Err(IlpError::TooLarge { rows: estimate, budget: row_budget });
    }

    // Objective: brown cost plus migration cost in DCs and in the network.
    for m in 0..n {
        bld.model.objective.push((phi[m], dcs[m].energy_price));
    }
    for (i, r) in reqs.iter().enumerate() {
        bld.model.objective.push((z[i], dcs[home[i]].migration_price * r.bandwidth_gbps));
    }
    for l in &lanes {
        bld.model.objective.push((l.y, dcs[l.d].migration_price));
    }

    // Each request is served exactly once: at home or migrated.
    for (i, r) in reqs.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = x[i].iter().map(|&v| (v, 1.0)).collect();
        terms.push((z[i], 1.0));
        bld.row(4, format!("eq4_i{}", r.id.0), terms, Sense::Eq, 1.0);
    }
    for (i, r) in reqs.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = omega[i].iter().flatten().map(|&v| (v, 1.0)).collect();
        terms.push((z[i], -1.0));
        bld.row(5, format!("eq5_i{}", r.id.0), terms, Sense::Eq, 0.0);
    }
    // Cores per server.
    let hosted_on = |m: usize, s: usize| -> Vec<(usize, u32)> {
        let mut out = Vec::new();
        for (i, r) in reqs.iter().enumerate() {
            if home[i] == m {
                out.push((x[i][s], r.cores));
            } else {
                out.push((omega[i][m][s], r.cores));
            }
        }
        out
    };
    for m in 0..n {
        for s in 0..dcs[m].num_servers() {
            let terms = hosted_on(m, s).into_iter().map(|(v, c)| (v, f64::from(c))).collect();
            bld.row(6, format!("eq6_m{}_n{}", dc(m), s + 1), terms, Sense::Le, f64::from(dcs[m].cores_per_server));
        }
    }
    // Brown power.
    for m in 0..n {
        let per_core = pw.dynamic_per_core(dcs[m].cores_per_server);
        let mut terms = vec![(phi[m], 1.0)];
        for s in 0..dcs[m].num_servers() {
            for (v, c) in hosted_on(m, s) {
                terms.push((v, -per_core * f64::from(c)));
            }
        }
        let rhs = if active {
            terms.extend(act[m].iter().map(|&a| (a, -static_w)));
            -dcs[m].renewable_budget
        } else {
            dcs[m].num_servers() as f64 * static_w - dcs[m].renewable_budget
        };
        bld.row(7, format!("eq7_m{}", dc(m)), terms, Sense::Ge, rhs);
        if active {
            for s in 0..dcs[m].num_servers() {
                for (v, _) in hosted_on(m, s) {
                    let name = format!("eq7_on_{}", bld.model.variables[v].name);
                    bld.row(7, name, vec![(v, 1.0), (act[m][s], -1.0)], Sense::Le, 0.0);
                }
            }
        }
    }
    for m in 0..n {
        bld.row(8, format!("eq8_m{}", dc(m)), vec![(phi[m], 1.0)], Sense::Ge, 0.0);
    }
    // Batch bandwidth covers the migrated VMs.
    for d in 0..n {
        for m in (0..n).filter(|&m| m != d) {
            let mut terms: Vec<(usize, f64)> = (1..=limits[d]).map(|h| (theta[&(d, m, h)], 1.0)).collect();
            for (i, r) in reqs.iter().enumerate().filter(|(i, _)| home[*i] == d) {
                terms.extend(omega[i][m].iter().map(|&v| (v, -r.bandwidth_gbps / c_f)));
            }
            bld.row(9, format!("eq9_d{}_m{}", dc(d), dc(m)), terms, Sense::Ge, 0.0);
        }
    }
    let lanes_of = |d: usize, m: Option<usize>, h: usize| -> Vec<&Lane> {
        lanes.iter().filter(|l| l.d == d && l.h == h && m.is_none_or(|m| l.m == m)).collect()
    };
    for (&(d, m, h), &t) in &theta {
        let ys: Vec<(usize, f64)> = lanes_of(d, Some(m), h).iter().map(|l| (l.y, fm)).collect();
        let mut terms = ys;
        terms.push((t, -1.0));
        bld.row(10, format!("eq10_d{}_m{}_h{h}", dc(d), dc(m)), terms, Sense::Ge, 0.0);
    }
    for (&(d, m, h), &t) in &theta {
        let mut terms: Vec<(usize, f64)> = lanes_of(d, Some(m), h).iter().map(|l| (l.y, 1.0)).collect();
        terms.push((t, -1.0));
        bld.row(11, format!("eq11_d{}_m{}_h{h}", dc(d), dc(m)), terms, Sense::Le, 0.0);
    }
    for d in 0..n {
        for h in 1..=limits[d] {
            let terms = lanes_of(d, None, h).iter().map(|l| (l.y, 1.0)).collect();
            bld.row(12, format!("eq12_d{}_h{h}", dc(d)), terms, Sense::Le, 1.0);
        }
    }
    for (&(d, m, h), &t) in &theta {
        let mut terms: Vec<(usize, f64)> = lanes_of(d, Some(m), h).iter().map(|l| (l.b, 1.0)).collect();
        terms.push((t, -1.0));
        bld.row(13, format!("eq13_d{}_m{}_h{h}", dc(d), dc(m)), terms, Sense::Eq, 0.0);
    }
    for d in 0..n {
        for h in 1..=limits[d] {
            let mut terms: Vec<(usize, f64)> =
                (0..n).filter(|&m| m != d).map(|m| (theta[&(d, m, h)], 1.0)).collect();
            terms.extend(lanes_of(d, None, h).iter().map(|l| (l.y, -p.kappa_gbps * f64::from(l.level) / c_f)));
            bld.row(14, format!("eq14_d{}_h{h}", dc(d)), terms, Sense::Le, 0.0);
        }
    }
    // Congestion cap per candidate path, over all batches that may use it.
    let mut by_path: BTreeMap<(usize, usize, usize), Vec<&Lane>> = BTreeMap::new();
    for l in &lanes {
        by_path.entry((l.d, l.m, l.k)).or_default().push(l);
    }
    let spare = |path: &Path| c_e * (p.umax - inst.grid.path_occupancy_ratio(path));
    for ((d, m, k), group) in &by_path {
        let rhs = spare(&group[0].path);
        // Background alone may already exceed the cap; then the path is
        // simply closed instead of making the empty migration infeasible.
        let (terms, rhs) = if rhs < 0.0 {
            (group.iter().flat_map(|l| [(l.b, 1.0), (l.y, 1.0)]).collect(), 0.0)
        } else {
            (group.iter().flat_map(|l| [(l.b, 1.0), (l.y, counted_guard)]).collect(), rhs)
        };
        bld.row(15, format!("eq15_d{}_m{}_k{}", dc(*d), dc(*m), k + 1), terms, Sense::Le, rhs);
    }
    let lane_name = |l: &Lane| format!("d{}_h{}_m{}_k{}", dc(l.d), l.h, dc(l.m), l.k + 1);
    for l in &lanes {
        bld.row(16, format!("eq16lo_{}", lane_name(l)), vec![(l.f, 1.0), (l.y, -1.0)], Sense::Ge, 0.0);
        bld.row(16, format!("eq16hi_{}", lane_name(l)), vec![(l.f, 1.0), (l.y, -fm)], Sense::Le, 0.0);
    }
    for l in &lanes {
        bld.row(17, format!("eq17_{}", lane_name(l)), vec![(l.b, 1.0), (l.y, -fm)], Sense::Le, 0.0);
    }
    for l in &lanes {
        // Binds only on a used lane: f + b <= spare + 1 - G + M(1 - y).
        let rhs = spare(&l.path) + 1.0 - guard as f64;
        bld.row(18, format!("eq18_{}", lane_name(l)), vec![(l.f, 1.0), (l.b, 1.0), (l.y, big_m)], Sense::Le, rhs + big_m);
    }
    // Ordering and non-overlap of lightpaths that share a link. Strict
    // inequalities become `<= -1` on integers; rows relax when either lane
    // is unused.
    let g = guard as f64;
    for &(a, b, dv) in &pairs {
        let (la, lb) = (&lanes[a], &lanes[b]);
        let tag = format!("{}_{}", lane_name(la), lane_name(lb));
        bld.row(
            19,
            format!("eq19_{tag}"),
            vec![(lb.f, 1.0), (la.f, -1.0), (dv, -big_m), (la.y, big_m), (lb.y, big_m)],
            Sense::Le,
            2.0 * big_m - 1.0,
        );
        bld.row(
            20,
            format!("eq20_{tag}"),
            vec![(la.f, 1.0), (lb.f, -1.0), (dv, big_m), (la.y, big_m), (lb.y, big_m)],
            Sense::Le,
            3.0 * big_m - 1.0,
        );
        bld.row(
            21,
            format!("eq21_{tag}"),
            vec![(la.f, 1.0), (la.b, 1.0), (la.y, g), (lb.f, -1.0), (dv, big_m)],
            Sense::Le,
            big_m,
        );
        bld.row(
            22,
            format!("eq22_{tag}"),
            vec![(lb.f, 1.0), (lb.b, 1.0), (lb.y, g), (la.f, -1.0), (dv, -big_m)],
            Sense::Le,
            0.0,
        );
    }
    Ok(bld.model)
}

impl IlpModel {
    pub fn count(&self, family: VarFamily) -> usize {
        self.variables.iter().filter(|v| v.family == family).count()
    }

    pub fn rows_tagged(&self, tag: u8) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    pub fn variable(&self, name: &str) -> Option<usize> {
        if self.index.is_empty() {
            return self.variables.iter().position(|v| v.name == name);
        }
        self.index.get(name).copied()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Names of rows, bounds and integrality conditions that `values`
    /// violates.
    pub fn violations(&self, values: &[f64]) -> Vec<String> {
        const TOL: f64 = 1e-6;
        let mut out = Vec::new();
        for (v, var) in self.variables.iter().enumerate() {
            let x = values[v];
            let integral = (x - x.round()).abs() <= TOL;
            let ok = x >= -TOL
                && var.upper.is_none_or(|u| x <= u + TOL)
                && match var.kind {
                    VarKind::Binary => integral && x <= 1.0 + TOL,
                    VarKind::Integer => integral,
                    VarKind::Continuous => true,
                };
            if !ok {
                out.push(format!("{} = {x}", var.name));
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * values[v]).sum();
            let scale = row.rhs.abs().max(1.0);
            let ok = match row.sense {
                Sense::Le => lhs <= row.rhs + TOL * scale,
                Sense::Ge => lhs >= row.rhs - TOL * scale,
                Sense::Eq => (lhs - row.rhs).abs() <= TOL * scale,
            };
            if !ok {
                out.push(row.name.clone());
            }
        }
        out
    }

    /// Translates an oracle solution into column values, or `None` if some
    /// batch uses a path outside the candidate sets or a datacenter cannot
    /// pack its final VMs.
    pub fn assignment_for(&self, inst: &ExactInstance, sol: &ExactSolution) -> Option<Vec<f64>> {
        let mut values = vec![0.0; self.variables.len()];
        let set = |values: &mut Vec<f64>, name: String, x: f64| -> Option<()> {
            values[self.variable(&name)?] = x;
            Some(())
        };
        let placement: BTreeMap<VmId, DcId> = sol.placement.iter().copied().collect();
        let pw = inst.model.power;
        for dc in &inst.dcs {
            let vms: Vec<_> = inst.requests.iter().filter(|r| placement.get(&r.id) == Some(&dc.id)).collect();
            let cores: Vec<u32> = vms.iter().map(|r| r.cores).collect();
            let servers = pack_exact(&cores, dc.num_servers(), dc.cores_per_server)?;
            let mut on = vec![false; dc.num_servers()];
            for (r, s) in vms.iter().zip(&servers) {
                on[*s] = true;
                let fam = if r.home_dc == dc.id { "x" } else { "w" };
                set(&mut values, format!("{fam}_m{}_n{}_i{}", dc.id.0, s + 1, r.id.0), 1.0)?;
                if r.home_dc != dc.id {
                    set(&mut values, format!("z_d{}_i{}", r.home_dc.0, r.id.0), 1.0)?;
                }
            }
            let static_count = match inst.model.static_mode {
                StaticPowerMode::AllServers => dc.num_servers(),
                StaticPowerMode::ActiveServers => {
                    for (s, &is_on) in on.iter().enumerate() {
                        set(&mut values, format!("a_m{}_n{}", dc.id.0, s + 1), if is_on { 1.0 } else { 0.0 })?;
                    }
                    on.iter().filter(|&&o| o).count()
                }
            };
            let total: u32 = cores.iter().sum();
            let power = static_count as f64 * pw.static_power() + pw.dynamic_per_core(dc.cores_per_server) * f64::from(total);
            set(&mut values, format!("Phi_m{}", dc.id.0), (power - dc.renewable_budget).max(0.0))?;
        }
        let p = &inst.params;
        let mut used: Vec<(String, f64, f64)> = Vec::new();
        let mut next_h: BTreeMap<DcId, usize> = BTreeMap::new();
        for b in &sol.batches {
            let h = next_h.entry(b.source).or_insert(0);
            *h += 1;
            let k = k_shortest_paths(inst.topo, b.source, b.dest, p.k_paths).iter().position(|q| *q == b.path)? + 1;
            let label = format!("d{}_h{}_m{}_k{k}", b.source.0, h, b.dest.0);
            let slots = slots_for_bandwidth(b.theta_gbps, 1, p.slot_rate_gbps) as f64;
            set(&mut values, format!("t_d{}_m{}_h{}", b.source.0, b.dest.0, h), slots)?;
            set(&mut values, format!("y_{label}"), 1.0)?;
            set(&mut values, format!("b_{label}"), slots)?;
            set(&mut values, format!("f_{label}"), b.slot_range.start as f64)?;
            used.push((label, b.slot_range.start as f64, 1.0));
        }
        // Order indicators: 1 when the first lane starts strictly earlier,
        // or when only the second lane is in use.
        for (v, var) in self.variables.iter().enumerate() {
            if var.family != VarFamily::Delta {
                continue;
            }
            let rest = &var.name["dl_".len()..];
            let cut = rest.find("_d")?;
            let (first, second) = (&rest[..cut], &rest[cut + 1..]);
            let start = |label: &str| used.iter().find(|u| u.0 == label).map(|u| u.1);
            values[v] = match (start(first), start(second)) {
                (Some(fa), Some(fb)) => f64::from(u8::from(fa < fb)),
                (None, Some(_)) => 1.0,
                _ => 0.0,
            };
        }
        Some(values)
    }
}
