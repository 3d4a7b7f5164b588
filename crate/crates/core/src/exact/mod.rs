//! Ground truth for tiny instances: the full integer model (buildable and
//! exportable as an LP file) and a native branch-and-bound oracle.
//!
//! The oracle decides, per datacenter, which VMs stay and how the others
//! are grouped into batches and destinations. Spectrum is then resolved
//! constructively: every batch order and path choice is tried with
//! first-fit placement. For the model's per-link non-overlap rows this
//! loses nothing. Take any feasible assignment and process its lightpaths
//! by increasing start slot. When lightpath `k` is placed, every earlier
//! lightpath `j` sharing a link with it ended before `k` originally began.
//! By induction `j` now starts no later than it did, so it still ends before
//! `k`'s original start. That leaves `k`'s original range free, and
//! first-fit places it at or below it. Left-shifting never raises a last
//! slot index, so the capacity rows keep holding. Heuristic runs are
//! first-fit allocations in commit order, so each one lies inside the
//! oracle's search space.

mod lp;
mod model;
mod solver;
mod verify;

use serde::{Deserialize, Serialize};

use crate::energy::{Datacenter, DcId, EnergyModel, VmId, VmRequest};
use crate::heuristics::{MigrationBatch, NetworkParams};
use crate::spectrum::SpectrumGrid;
use crate::topology::Topology;
use crate::workload::ScenarioDraw;

pub use lp::{export_lp, write_lp};
pub use model::{build_ilp, IlpError, IlpModel, Row, Sense, VarFamily, VarKind, Variable};
pub use solver::solve_exact;
pub use verify::verify_solution;

/// One migration cycle, frozen for exact analysis.
#[derive(Clone, Debug)]
pub struct ExactInstance<'t> {
    pub topo: &'t Topology,
    /// Background occupancy before any migration.
    pub grid: SpectrumGrid,
    /// Datacenters with every request hosted at home.
    pub dcs: Vec<Datacenter>,
    pub requests: Vec<VmRequest>,
    pub model: EnergyModel,
    pub params: NetworkParams,
}

impl<'t> ExactInstance<'t> {
    pub fn new(
        topo: &'t Topology,
        grid: SpectrumGrid,
        dcs: Vec<Datacenter>,
        requests: Vec<VmRequest>,
        model: EnergyModel,
        params: NetworkParams,
    ) -> Self {
        ExactInstance { topo, grid, dcs, requests, model, params }
    }

    pub fn from_draw(topo: &'t Topology, grid: SpectrumGrid, draw: &ScenarioDraw, model: EnergyModel, params: NetworkParams) -> Self {
        Self::new(topo, grid, draw.dcs.clone(), draw.requests.clone(), model, params)
    }

    /// Batches a source may send: `h_max`, or one per hosted VM when unset.
    pub fn batch_limit(&self, dc: DcId) -> usize {
        let hosted = self.requests.iter().filter(|r| r.home_dc == dc).count();
        self.params.h_max.map_or(hosted, |h| h.min(hosted.max(1)))
    }
}

/// Search limits for [`solve_exact`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactLimits {
    /// Branch-and-bound plus spectrum-search nodes.
    pub max_nodes: u64,
    /// Alternatives enumerated for a single datacenter.
    pub max_plans_per_dc: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { max_nodes: 50_000_000, max_plans_per_dc: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Search stopped early; the reported solution is only the incumbent.
    NotSolved { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub status: SolveStatus,
    pub obj: f64,
    pub obj2: f64,
    /// Objective with no migration at all.
    pub obj_no_migration: f64,
    /// Batches in spectrum-allocation order.
    pub batches: Vec<MigrationBatch>,
    /// Final host of every request.
    pub placement: Vec<(VmId, DcId)>,
    pub explored_nodes: u64,
}

impl ExactSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
