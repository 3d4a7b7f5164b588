use std::collections::BTreeMap;

use super::{ExactInstance, ExactLimits, ExactSolution, SolveStatus};
use crate::energy::{brown_cost, DcId, StaticPowerMode, VmId};
use crate::heuristics::MigrationBatch;
use crate::spectrum::{slots_for_bandwidth, SpectrumGrid};
use crate::topology::{k_shortest_paths, modulation_level, Path};

const EPS: f64 = 1e-9;

struct Dc {
    id: DcId,
    servers: usize,
    phi: u32,
    alpha: f64,
    beta: f64,
    xi: f64,
    capacity: u32,
}

struct Req {
    id: VmId,
    cores: u32,
    sigma: f64,
}

#[derive(Clone)]
struct Block {
    dest: usize,
    vms: Vec<usize>,
    theta: f64,
}

struct Plan {
    kept: Vec<usize>,
    kept_cores: u32,
    blocks: Vec<Block>,
    cost: f64,
}

struct Route {
    path: Path,
    level: u8,
}

struct Search<'a, 'i> {
    inst: &'a ExactInstance<'i>,
    dcs: Vec<Dc>,
    reqs: Vec<Req>,
    plans: Vec<Vec<Plan>>,
    routes: Vec<Vec<Vec<Route>>>,
    order: Vec<usize>,
    limits: ExactLimits,
    nodes: u64,
    aborted: bool,
    best_obj: f64,
    best: Option<Incumbent>,
    // DFS scratch, indexed by datacenter.
    choice: Vec<Option<usize>>,
    incoming: Vec<Vec<usize>>,
    incoming_cores: Vec<u32>,
}

#[derive(Clone)]
struct Incumbent {
    obj: f64,
    obj2: f64,
    lightpaths: Vec<(usize, usize, Block, Path, crate::spectrum::SlotRange)>,
}

/// Proves the optimum of a small instance by depth-first branch and bound.
///
/// Bounds: for every undecided datacenter the cheapest of its own plans
/// given the load known so far, or a fractional transport relaxation that
/// lets all undecided VMs flow to free renewable headroom first and then to
/// the cheapest brown capacity. The larger of the two prunes.
pub fn solve_exact(inst: &ExactInstance, limits: ExactLimits) -> ExactSolution {
    let dcs: Vec<Dc> = inst
        .dcs
        .iter()
        .map(|d| Dc {
            id: d.id,
            servers: d.num_servers(),
            phi: d.cores_per_server,
            alpha: d.energy_price,
            beta: d.migration_price,
            xi: d.renewable_budget,
            capacity: d.num_servers() as u32 * d.cores_per_server,
        })
        .collect();
    let mut reqs = Vec::new();
    let mut hosted: Vec<Vec<usize>> = vec![Vec::new(); dcs.len()];
    let mut sorted = inst.requests.clone();
    sorted.sort_by_key(|r| r.id);
    for r in &sorted {
        let home = dcs.iter().position(|d| d.id == r.home_dc).expect("request homed at a known datacenter");
        hosted[home].push(reqs.len());
        reqs.push(Req { id: r.id, cores: r.cores, sigma: r.bandwidth_gbps });
    }
    let routes: Vec<Vec<Vec<Route>>> = dcs
        .iter()
        .map(|s| {
            dcs.iter()
                .map(|d| {
                    if s.id == d.id {
                        return Vec::new();
                    }
                    k_shortest_paths(inst.topo, s.id, d.id, inst.params.k_paths)
                        .into_iter()
                        .map(|path| Route { level: modulation_level(&path, &inst.params.modulation), path })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut search = Search {
        inst,
        dcs,
        reqs,
        plans: Vec::new(),
        routes,
        order: Vec::new(),
        limits,
        nodes: 0,
        aborted: false,
        best_obj: f64::INFINITY,
        best: None,
        choice: Vec::new(),
        incoming: Vec::new(),
        incoming_cores: Vec::new(),
    };
    let n = search.dcs.len();
    let mut enumerated = true;
    for (m, list) in hosted.iter().enumerate() {
        match search.enumerate_plans(m, list) {
            Some(plans) => search.plans.push(plans),
            None => {
                enumerated = false;
                break;
            }
        }
    }
    if !enumerated {
        let obj = no_migration_objective(inst);
        return ExactSolution {
            status: SolveStatus::NotSolved { reason: "too many alternatives for one datacenter".into() },
            obj,
            obj2: obj,
            obj_no_migration: obj,
            batches: Vec::new(),
            placement: inst.requests.iter().map(|r| (r.id, r.home_dc)).collect(),
            explored_nodes: 0,
        };
    }
    search.choice = vec![None; n];
    search.incoming = vec![Vec::new(); n];
    search.incoming_cores = vec![0; n];

    // Plan 0 is always "keep everything": the no-migration incumbent.
    let (obj0, obj2_0) = search.evaluate(&vec![0; n]).expect("initial placement is feasible");
    search.best_obj = obj0;
    search.best = Some(Incumbent { obj: obj0, obj2: obj2_0, lightpaths: Vec::new() });

    // Brown datacenters first: their choices drive everything else.
    let mut order: Vec<usize> = (0..n).collect();
    let brown = |m: usize| {
        let d = &search.dcs[m];
        let cores: u32 = hosted[m].iter().map(|&i| search.reqs[i].cores).sum();
        d.alpha * (search.power_lb(m, cores) - d.xi).max(0.0)
    };
    let keys: Vec<f64> = (0..n).map(brown).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    search.order = order;

    search.dfs(0, 0.0);

    let best = search.best.clone().expect("incumbent always set");
    let status = if search.aborted {
        SolveStatus::NotSolved { reason: format!("search limit reached after {} nodes", search.nodes) }
    } else {
        SolveStatus::Optimal
    };
    let mut placement: BTreeMap<VmId, DcId> = BTreeMap::new();
    for (m, list) in hosted.iter().enumerate() {
        for &i in list {
            placement.insert(search.reqs[i].id, search.dcs[m].id);
        }
    }
    let batches = best
        .lightpaths
        .iter()
        .enumerate()
        .map(|(index, (src, _, block, path, range))| {
            for &v in &block.vms {
                placement.insert(search.reqs[v].id, search.dcs[block.dest].id);
            }
            MigrationBatch {
                index,
                source: search.dcs[*src].id,
                dest: search.dcs[block.dest].id,
                vms: block.vms.iter().map(|&v| search.reqs[v].id).collect(),
                theta_gbps: block.theta,
                path: path.clone(),
                slot_range: *range,
            }
        })
        .collect();
    ExactSolution {
        status,
        obj: best.obj,
        obj2: best.obj2,
        obj_no_migration: obj0,
        batches,
        placement: placement.into_iter().collect(),
        explored_nodes: search.nodes,
    }
}

fn no_migration_objective(inst: &ExactInstance) -> f64 {
    brown_cost(&inst.dcs, &inst.model)
}

impl Search<'_, '_> {
    fn power_lb(&self, m: usize, cores: u32) -> f64 {
        let d = &self.dcs[m];
        self.inst.model.power_lower_bound(cores, d.servers, d.phi)
    }

    fn brown_lb(&self, m: usize, cores: u32) -> f64 {
        let d = &self.dcs[m];
        d.alpha * (self.power_lb(m, cores) - d.xi).max(0.0)
    }

    fn block_ok(&self, m: usize, block: &Block) -> bool {
        let p = &self.inst.params;
        let cores: u32 = block.vms.iter().map(|&v| self.reqs[v].cores).sum();
        cores <= self.dcs[block.dest].capacity
            && self.routes[m][block.dest].iter().any(|r| block.theta <= p.kappa_gbps * f64::from(r.level) + EPS)
    }

    /// Every way to keep a subset of `hosted` and split the rest into at
    /// most `h_max` batches, each with its own destination.
    fn enumerate_plans(&self, m: usize, hosted: &[usize]) -> Option<Vec<Plan>> {
        let h = self.inst.batch_limit(self.dcs[m].id);
        let others: Vec<usize> = (0..self.dcs.len()).filter(|&d| d != m).collect();
        let mut plans = Vec::new();
        // Restricted-growth labels: 0 keeps the VM, k > 0 puts it in batch k.
        let mut labels = vec![0usize; hosted.len()];
        let mut work = 0usize;
        loop {
            let blocks = labels.iter().copied().max().unwrap_or(0);
            if blocks > 0 && others.is_empty() {
                work += 1;
                if !next_labels(&mut labels, h) {
                    break;
                }
                continue;
            }
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); blocks];
            let mut kept = Vec::new();
            for (slot, &label) in labels.iter().enumerate() {
                if label == 0 {
                    kept.push(hosted[slot]);
                } else {
                    groups[label - 1].push(hosted[slot]);
                }
            }
            let kept_cores = kept.iter().map(|&i| self.reqs[i].cores).sum();
            // Cartesian product of destinations over the groups.
            let mut dest = vec![0usize; blocks];
            loop {
                let chosen: Vec<Block> = groups
                    .iter()
                    .zip(&dest)
                    .map(|(g, &k)| Block {
                        dest: others[k],
                        vms: g.clone(),
                        theta: g.iter().map(|&i| self.reqs[i].sigma).sum(),
                    })
                    .collect();
                work += 1;
                if work > self.limits.max_plans_per_dc.saturating_mul(20) {
                    return None;
                }
                if chosen.iter().all(|b| self.block_ok(m, b)) {
                    let beta = self.dcs[m].beta;
                    let cost = chosen.iter().map(|b| beta * (b.theta + 1.0)).sum();
                    plans.push(Plan { kept: kept.clone(), kept_cores, blocks: chosen, cost });
                    if plans.len() > self.limits.max_plans_per_dc {
                        return None;
                    }
                }
                if !advance(&mut dest, others.len()) {
                    break;
                }
            }
            if !next_labels(&mut labels, h) {
                break;
            }
        }
        Some(plans)
    }

    /// Exact objective of a full choice, or `None` if some datacenter
    /// cannot pack what it ends up hosting.
    fn evaluate(&self, choice: &[usize]) -> Option<(f64, f64)> {
        let n = self.dcs.len();
        let mut items: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut mig = 0.0;
        for (m, &c) in choice.iter().enumerate() {
            let plan = &self.plans[m][c];
            items[m].extend(plan.kept.iter().map(|&i| self.reqs[i].cores));
            for b in &plan.blocks {
                items[b.dest].extend(b.vms.iter().map(|&i| self.reqs[i].cores));
            }
            mig += plan.cost;
        }
        let mut obj2 = 0.0;
        for (m, list) in items.iter().enumerate() {
            let d = &self.dcs[m];
            let power = self.inst.model.best_power(list, d.servers, d.phi)?;
            obj2 += d.alpha * (power - d.xi).max(0.0);
        }
        Some((obj2 + mig, obj2))
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            self.aborted = true;
        }
        !self.aborted
    }

    fn lower_bound(&self, depth: usize, decided_cost: f64) -> f64 {
        let mut own = 0.0;
        let mut fixed = vec![0u32; self.dcs.len()];
        let mut floating = 0u32;
        for (pos, &m) in self.order.iter().enumerate() {
            let inc = self.incoming_cores[m];
            if pos < depth {
                let plan = &self.plans[m][self.choice[m].unwrap()];
                fixed[m] = plan.kept_cores + inc;
                own += self.brown_lb(m, fixed[m]);
            } else {
                fixed[m] = inc;
                floating += self.plans[m][0].kept_cores;
                own += self.plans[m]
                    .iter()
                    .map(|p| self.brown_lb(m, p.kept_cores + inc) + p.cost)
                    .fold(f64::INFINITY, f64::min);
            }
        }
        decided_cost + own.max(self.transport_bound(&fixed, floating))
    }

    /// Brown cost if `floating` cores could be spread fractionally over the
    /// datacenters on top of their `fixed` loads, ignoring migration costs.
    fn transport_bound(&self, fixed: &[u32], floating: u32) -> f64 {
        let pw = &self.inst.model.power;
        let mut base = 0.0;
        let mut free = 0.0;
        let mut priced: Vec<(f64, f64)> = Vec::new();
        for (m, d) in self.dcs.iter().enumerate() {
            let phi = f64::from(d.phi);
            let (stat, per_core) = match self.inst.model.static_mode {
                StaticPowerMode::AllServers => (d.servers as f64 * pw.static_power(), (pw.peak_w - pw.idle_w) / phi),
                StaticPowerMode::ActiveServers => (0.0, (pw.peak_w - pw.idle_w + pw.static_power()) / phi),
            };
            let load = f64::from(fixed[m]);
            let over = stat + per_core * load - d.xi;
            base += d.alpha * over.max(0.0);
            let room = f64::from(d.capacity.saturating_sub(fixed[m]));
            let green = ((-over).max(0.0) / per_core).min(room);
            free += green;
            priced.push((d.alpha * per_core, room - green));
        }
        let mut rest = f64::from(floating) - free;
        if rest <= 0.0 {
            return base;
        }
        priced.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (price, room) in priced {
            let take = rest.min(room);
            base += price * take;
            rest -= take;
            if rest <= 0.0 {
                break;
            }
        }
        base
    }

    fn dfs(&mut self, depth: usize, decided_cost: f64) {
        if !self.tick() {
            return;
        }
        let n = self.dcs.len();
        if depth == n {
            self.leaf();
            return;
        }
        if self.lower_bound(depth, decided_cost) >= self.best_obj - EPS {
            return;
        }
        let m = self.order[depth];
        let inc = self.incoming_cores[m];
        let mut ranked: Vec<(f64, usize)> = self.plans[m]
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kept_cores + inc <= self.dcs[m].capacity)
            .map(|(k, p)| (self.brown_lb(m, p.kept_cores + inc) + p.cost, k))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, k) in ranked {
            if self.aborted {
                return;
            }
            let ok = self.plans[m][k].blocks.iter().all(|b| {
                let cores: u32 = b.vms.iter().map(|&v| self.reqs[v].cores).sum();
                let kept = self.choice[b.dest].map_or(0, |c| self.plans[b.dest][c].kept_cores);
                kept + self.incoming_cores[b.dest] + cores <= self.dcs[b.dest].capacity
            });
            if !ok {
                continue;
            }
            self.apply(m, k, true);
            let cost = self.plans[m][k].cost;
            self.dfs(depth + 1, decided_cost + cost);
            self.apply(m, k, false);
        }
    }

    fn apply(&mut self, m: usize, k: usize, on: bool) {
        self.choice[m] = on.then_some(k);
        for b in &self.plans[m][k].blocks {
            let cores: u32 = b.vms.iter().map(|&v| self.reqs[v].cores).sum();
            if on {
                self.incoming[b.dest].extend(&b.vms);
                self.incoming_cores[b.dest] += cores;
            } else {
                let keep = self.incoming[b.dest].len() - b.vms.len();
                self.incoming[b.dest].truncate(keep);
                self.incoming_cores[b.dest] -= cores;
            }
        }
        // Undo must mirror do in reverse order; the DFS guarantees it.
    }

    fn leaf(&mut self) {
        let choice: Vec<usize> = self.choice.iter().map(|c| c.unwrap()).collect();
        let Some((obj, obj2)) = self.evaluate(&choice) else {
            return;
        };
        if obj >= self.best_obj - EPS {
            return;
        }
        let mut batches: Vec<(usize, usize, Block)> = Vec::new();
        for (m, &c) in choice.iter().enumerate() {
            for (h, b) in self.plans[m][c].blocks.iter().enumerate() {
                batches.push((m, h, b.clone()));
            }
        }
        let mut grid = self.inst.grid.clone();
        let mut used = vec![false; batches.len()];
        let mut placed = Vec::new();
        if self.route_all(&batches, &mut grid, &mut used, &mut placed) {
            self.best_obj = obj;
            self.best = Some(Incumbent { obj, obj2, lightpaths: placed });
        }
    }

    /// Tries every order and path choice with first-fit placement.
    fn route_all(
        &mut self,
        batches: &[(usize, usize, Block)],
        grid: &mut SpectrumGrid,
        used: &mut [bool],
        placed: &mut Vec<(usize, usize, Block, Path, crate::spectrum::SlotRange)>,
    ) -> bool {
        if placed.len() == batches.len() {
            return true;
        }
        let p = &self.inst.params;
        let (guard, umax, kappa, rate) = (p.guard_slots, p.umax, p.kappa_gbps, p.slot_rate_gbps);
        for j in 0..batches.len() {
            if used[j] {
                continue;
            }
            let (src, h, ref block) = batches[j];
            for r in 0..self.routes[src][block.dest].len() {
                if !self.tick() {
                    return false;
                }
                let route = &self.routes[src][block.dest][r];
                if block.theta > kappa * f64::from(route.level) + EPS {
                    continue;
                }
                let width = slots_for_bandwidth(block.theta, route.level, rate);
                let path = route.path.clone();
                let Ok(range) = grid.first_fit_allocate(&path, width, guard, umax) else {
                    continue;
                };
                used[j] = true;
                placed.push((src, h, block.clone(), path.clone(), range));
                if self.route_all(batches, grid, used, placed) {
                    return true;
                }
                placed.pop();
                used[j] = false;
                grid.release(&path, range).expect("range was just allocated");
            }
        }
        false
    }
}

/// Next restricted-growth string with values in `0..=h` where a new batch
/// label may only be one above the largest used so far.
fn next_labels(labels: &mut [usize], h: usize) -> bool {
    for i in (0..labels.len()).rev() {
        let max_before = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] < h && labels[i] <= max_before {
            labels[i] += 1;
            for l in &mut labels[i + 1..] {
                *l = 0;
            }
            return true;
        }
    }
    false
}

fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_enumerate_restricted_growth() {
        let mut l = vec![0, 0, 0];
        let mut seen = vec![l.clone()];
        while next_labels(&mut l, 2) {
            seen.push(l.clone());
        }
        // Keep/batch-1/batch-2 assignments of 3 VMs with unlabelled batches.
        assert_eq!(seen.len(), 1 + 3 + 3 * 2 + (1 + 3));
        assert_eq!(seen[1], vec![0, 0, 1]);
        assert!(seen.contains(&vec![1, 2, 0]));
        assert!(!seen.contains(&vec![2, 1, 0]));
    }
}
