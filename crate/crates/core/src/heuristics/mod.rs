//! Anycast migration heuristics and per-cycle orchestration.
//!
//! A cycle starts from a drawn scenario, computes the relaxed migration
//! demand, then lets one of the selection strategies move designated VMs
//! from brown sources to green sinks in batches. Each batch rides one
//! lightpath allocated first-fit, and is committed only if it lowers the
//! total objective.

mod algorithms;
mod batch;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::energy::{brown_cost, objective, Datacenter, DcId, EnergyModel, VmId, VmRequest};
use crate::spectrum::{Lightpath, SlotRange, SpectrumGrid};
use crate::topology::{k_shortest_paths, ModulationTable, Path, Topology};
use crate::workload::{suboptimal_allocation, MigrationDemand, ScenarioDraw};

pub use algorithms::{anycast_ep, anycast_jre, anycast_mp, anycast_sp};
pub use batch::{build_batch, weight_ep, weight_jre, BatchError, BatchPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    None,
    Sp,
    Mp,
    Ep,
    Jre,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::None, Algorithm::Sp, Algorithm::Mp, Algorithm::Ep, Algorithm::Jre];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::None => "none",
            Algorithm::Sp => "sp",
            Algorithm::Mp => "mp",
            Algorithm::Ep => "ep",
            Algorithm::Jre => "jre",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected none, sp, mp, ep or jre)"))
    }
}

/// Network-side knobs of a migration cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    /// Candidate paths per (source, sink) pair.
    pub k_paths: usize,
    /// Per-batch bandwidth cap κ before modulation scaling.
    pub kappa_gbps: f64,
    pub guard_slots: usize,
    pub umax: f64,
    /// Batches allowed per source DC; unlimited when `None`.
    pub h_max: Option<usize>,
    pub modulation: ModulationTable,
    pub slot_rate_gbps: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            k_paths: 3,
            kappa_gbps: 100.0,
            guard_slots: 1,
            umax: 1.0,
            h_max: None,
            modulation: ModulationTable::default(),
            slot_rate_gbps: 12.5,
        }
    }
}

/// One committed batch `𝒬_h` and its lightpath.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationBatch {
    pub index: usize,
    pub source: DcId,
    pub dest: DcId,
    pub vms: Vec<VmId>,
    pub theta_gbps: f64,
    pub path: Path,
    pub slot_range: SlotRange,
}

impl MigrationBatch {
    pub fn lightpath(&self) -> Lightpath {
        Lightpath { path: self.path.clone(), range: self.slot_range }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationLog {
    pub batches: Vec<MigrationBatch>,
    pub blocked_attempts: usize,
    /// `𝒟_out`: DCs dropped from the candidate sets after a failure.
    pub excluded: BTreeSet<DcId>,
}

/// Why a candidate (source, sink, path) did not produce a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attempt {
    Committed,
    /// Batch empty or spectrum allocation refused.
    Blocked,
    /// The batch would not lower the objective; the source is done.
    NotWorthwhile,
}

/// Mutable state of one migration cycle.
#[derive(Clone, Debug)]
pub struct CycleState<'t> {
    pub topo: &'t Topology,
    pub grid: SpectrumGrid,
    pub dcs: Vec<Datacenter>,
    pub requests: BTreeMap<VmId, VmRequest>,
    pub model: EnergyModel,
    pub params: NetworkParams,
    pub demand: MigrationDemand,
    pub log: MigrationLog,
    remaining: BTreeMap<DcId, Vec<VmId>>,
    batches_from: BTreeMap<DcId, usize>,
    paths: BTreeMap<(DcId, DcId), Vec<Path>>,
}

impl<'t> CycleState<'t> {
    pub fn new(
        topo: &'t Topology,
        grid: SpectrumGrid,
        dcs: Vec<Datacenter>,
        requests: &[VmRequest],
        model: EnergyModel,
        params: NetworkParams,
    ) -> Self {
        let demand = suboptimal_allocation(&dcs, requests, &model);
        let remaining = demand.sources.clone();
        CycleState {
            topo,
            grid,
            dcs,
            requests: requests.iter().map(|r| (r.id, r.clone())).collect(),
            model,
            params,
            demand,
            log: MigrationLog::default(),
            remaining,
            batches_from: BTreeMap::new(),
            paths: BTreeMap::new(),
        }
    }

    pub fn from_draw(topo: &'t Topology, grid: SpectrumGrid, draw: &ScenarioDraw, model: EnergyModel, params: NetworkParams) -> Self {
        Self::new(topo, grid, draw.dcs.clone(), &draw.requests, model, params)
    }

    pub fn dc(&self, id: DcId) -> &Datacenter {
        self.dcs.iter().find(|d| d.id == id).expect("known datacenter")
    }

    fn dc_index(&self, id: DcId) -> usize {
        self.dcs.iter().position(|d| d.id == id).expect("known datacenter")
    }

    /// Designated VMs of `source` not yet migrated, ascending bandwidth.
    pub fn remaining(&self, source: DcId) -> &[VmId] {
        self.remaining.get(&source).map_or(&[], Vec::as_slice)
    }

    fn remaining_requests(&self, source: DcId) -> Vec<&VmRequest> {
        self.remaining(source).iter().map(|id| &self.requests[id]).collect()
    }

    /// Live `𝒟_s`: brown sources with designated VMs left, not excluded and
    /// under the per-source batch limit.
    pub fn live_sources(&self) -> Vec<DcId> {
        self.remaining
            .iter()
            .filter(|(id, vms)| {
                !vms.is_empty()
                    && !self.log.excluded.contains(id)
                    && self.params.h_max.is_none_or(|h| self.batches_from.get(id).copied().unwrap_or(0) < h)
                    && self.dc(**id).brown_energy(&self.model) > 0.0
            })
            .map(|(id, _)| *id)
            .collect()
    }

    /// Live `𝒟_d`: sinks not excluded that still have renewable headroom
    /// and free cores.
    pub fn live_sinks(&self) -> Vec<DcId> {
        self.demand
            .sinks
            .keys()
            .filter(|id| !self.log.excluded.contains(id))
            .filter(|id| {
                let dc = self.dc(**id);
                dc.headroom(&self.model) > 1e-9 && dc.free_cores() > 0
            })
            .copied()
            .collect()
    }

    /// K-shortest paths between two DCs, cached for the cycle.
    pub fn candidate_paths(&mut self, s: DcId, d: DcId) -> Vec<Path> {
        let (topo, k) = (self.topo, self.params.k_paths);
        self.paths.entry((s, d)).or_insert_with(|| k_shortest_paths(topo, s, d, k)).clone()
    }

    pub fn plan(&self, s: DcId, d: DcId, path: &Path) -> Result<BatchPlan, BatchError> {
        build_batch(
            self.dc(s),
            self.dc(d),
            &self.remaining_requests(s),
            path,
            self.params.kappa_gbps,
            &self.params.modulation,
            self.params.slot_rate_gbps,
            &self.model,
        )
    }

    /// Change in total objective if `plan` were committed.
    pub fn objective_delta(&self, plan: &BatchPlan) -> f64 {
        let src = self.dc(plan.source);
        let dst = self.dc(plan.dest);
        let vms: Vec<&VmRequest> = plan.vms.iter().map(|v| &self.requests[v]).collect();
        let src_after = (src.power_without(&self.model, &vms).expect("hosted") - src.renewable_budget).max(0.0);
        let dst_after = (dst.power_with(&self.model, &vms).expect("planned to fit") - dst.renewable_budget).max(0.0);
        src.energy_price * (src_after - src.brown_energy(&self.model))
            + dst.energy_price * (dst_after - dst.brown_energy(&self.model))
            + src.migration_price * (plan.theta_gbps + 1.0)
    }

    /// Packs, checks the commit guard, allocates spectrum and commits.
    pub fn attempt(&mut self, s: DcId, d: DcId, path: &Path) -> Attempt {
        let Ok(plan) = self.plan(s, d, path) else {
            self.log.blocked_attempts += 1;
            return Attempt::Blocked;
        };
        if self.objective_delta(&plan) >= -1e-9 {
            return Attempt::NotWorthwhile;
        }
        let Ok(range) = self.grid.first_fit_allocate(path, plan.width, self.params.guard_slots, self.params.umax) else {
            self.log.blocked_attempts += 1;
            return Attempt::Blocked;
        };
        self.commit(plan, path.clone(), range);
        Attempt::Committed
    }

    fn commit(&mut self, plan: BatchPlan, path: Path, range: SlotRange) {
        let vms: Vec<VmRequest> = plan.vms.iter().map(|v| self.requests[v].clone()).collect();
        let refs: Vec<&VmRequest> = vms.iter().collect();
        let (si, di) = (self.dc_index(plan.source), self.dc_index(plan.dest));
        self.dcs[si].remove_vms(&refs).expect("batch VMs are hosted at the source");
        self.dcs[di].place_vms(&refs).expect("batch was planned to fit");
        for id in &plan.vms {
            self.requests.get_mut(id).unwrap().migrated_to = Some(plan.dest);
        }
        if let Some(list) = self.remaining.get_mut(&plan.source) {
            list.retain(|v| !plan.vms.contains(v));
        }
        *self.batches_from.entry(plan.source).or_default() += 1;
        let index = self.log.batches.len();
        self.log.batches.push(MigrationBatch {
            index,
            source: plan.source,
            dest: plan.dest,
            vms: plan.vms,
            theta_gbps: plan.theta_gbps,
            path,
            slot_range: range,
        });
    }

    pub fn exclude(&mut self, dc: DcId) {
        self.log.excluded.insert(dc);
    }

    /// Watts the source still wants to shed: dynamic power of its
    /// remaining designated VMs.
    pub fn source_requirement(&self, s: DcId) -> f64 {
        let per_core = self.model.power.dynamic_per_core(self.dc(s).cores_per_server);
        self.remaining_requests(s).iter().map(|v| f64::from(v.cores) * per_core).sum()
    }

    pub fn sink_requirement(&self, d: DcId) -> f64 {
        self.dc(d).headroom(&self.model).max(0.0)
    }

    pub fn lightpaths(&self) -> Vec<Lightpath> {
        self.log.batches.iter().map(MigrationBatch::lightpath).collect()
    }
}

/// Result of one migration cycle. Everything except wall-clock time is a
/// pure function of the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub algorithm: Algorithm,
    pub obj: f64,
    pub obj2: f64,
    pub obj2_before: f64,
    pub relaxed_obj2: f64,
    /// Committed batches (lightpaths).
    pub migrations: usize,
    pub migrated_vms: usize,
    pub blocked: usize,
    pub phi_before: Vec<(DcId, f64)>,
    pub phi_after: Vec<(DcId, f64)>,
}

/// Final state of a cycle, for auditing.
#[derive(Clone, Debug)]
pub struct CycleOutcome {
    pub report: CycleReport,
    pub log: MigrationLog,
    pub dcs: Vec<Datacenter>,
    pub requests: Vec<VmRequest>,
    pub grid: SpectrumGrid,
    pub runtime: Duration,
}

/// Runs one algorithm on one scenario.
pub fn run_cycle(
    topo: &Topology,
    grid: SpectrumGrid,
    draw: &ScenarioDraw,
    model: &EnergyModel,
    params: &NetworkParams,
    algorithm: Algorithm,
) -> CycleOutcome {
    let started = Instant::now();
    let phi = |dcs: &[Datacenter]| dcs.iter().map(|d| (d.id, d.brown_energy(model))).collect::<Vec<_>>();
    let phi_before = phi(&draw.dcs);
    let obj2_before = brown_cost(&draw.dcs, model);
    let mut state = CycleState::from_draw(topo, grid, draw, *model, params.clone());
    match algorithm {
        Algorithm::None => {}
        Algorithm::Sp => anycast_sp(&mut state),
        Algorithm::Mp => anycast_mp(&mut state),
        Algorithm::Ep => anycast_ep(&mut state),
        Algorithm::Jre => anycast_jre(&mut state),
    }
    let runtime = started.elapsed();
    let lightpaths = state.log.batches.iter().map(|b| (b.source, b.theta_gbps));
    let report = CycleReport {
        algorithm,
        obj: objective(&state.dcs, model, lightpaths),
        obj2: brown_cost(&state.dcs, model),
        obj2_before,
        relaxed_obj2: state.demand.relaxed_obj2,
        migrations: state.log.batches.len(),
        migrated_vms: state.log.batches.iter().map(|b| b.vms.len()).sum(),
        blocked: state.log.blocked_attempts,
        phi_before,
        phi_after: phi(&state.dcs),
    };
    CycleOutcome {
        report,
        log: state.log,
        dcs: state.dcs,
        requests: state.requests.into_values().collect(),
        grid: state.grid,
        runtime,
    }
}
