use serde::{Deserialize, Serialize};

use crate::energy::{Datacenter, DcId, EnergyModel, VmId, VmRequest};
use crate::heuristics::{MigrationBatch, NetworkParams};
use crate::topology::TopologySpec;

/// Post-cycle datacenter state as recorded in a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcState {
    pub id: DcId,
    pub servers: usize,
    pub cores_per_server: u32,
    pub energy_price: f64,
    pub migration_price: f64,
    pub renewable_budget: f64,
    /// Used cores per server.
    pub used: Vec<u32>,
}

impl DcState {
    pub fn of(dc: &Datacenter) -> Self {
        DcState {
            id: dc.id,
            servers: dc.num_servers(),
            cores_per_server: dc.cores_per_server,
            energy_price: dc.energy_price,
            migration_price: dc.migration_price,
            renewable_budget: dc.renewable_budget,
            used: dc.servers.iter().map(|s| s.used_cores).collect(),
        }
    }
}

/// Everything needed to re-check one cell without re-running it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub algorithm: String,
    pub umax: f64,
    pub load: f64,
    pub replication: u64,
    pub seed: u64,
    pub topology: TopologySpec,
    pub params: NetworkParams,
    pub model: EnergyModel,
    /// Requests as drawn, before migration.
    pub requests: Vec<VmRequest>,
    pub final_location: Vec<(VmId, DcId)>,
    pub dcs: Vec<DcState>,
    pub batches: Vec<MigrationBatch>,
    pub obj: f64,
    pub obj2: f64,
}

impl Snapshot {
    pub fn file_name(&self) -> String {
        format!("u{}_l{}_r{}_{}.json", self.umax, self.load, self.replication, self.algorithm)
    }
}
