//! Server and datacenter power accounting, brown energy, CPU capacity and
//! the cost terms of the migration objective.
//!
//! Power is per migration cycle: a server with `ζ` of `φ` cores busy draws
//! `P^s + (P^p - P^i)·ζ/φ` watts with `P^s = P^i + (η - 1)·P^p`. A
//! datacenter's brown energy is whatever its servers draw beyond the
//! renewable budget `ξ`. Prices are in cents per watt-cycle (α) and cents
//! per migration unit (β).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeId;

/// Datacenters are identified by the node they sit on.
pub type DcId = NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VmId(pub u32);

impl fmt::Display for VmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vm{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid power parameters: {0}")]
    InvalidParams(String),
    #[error("datacenter {dc} cannot host {vm}: not enough free cores")]
    Capacity { dc: DcId, vm: VmId },
    #[error("{vm} is not hosted in datacenter {dc}")]
    NotHosted { dc: DcId, vm: VmId },
    #[error("{vm} is already hosted in datacenter {dc}")]
    AlreadyHosted { dc: DcId, vm: VmId },
}

/// Idle/peak server power and facility PUE. Static and per-core dynamic
/// power are always derived from these three numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub idle_w: f64,
    pub peak_w: f64,
    pub pue: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams { idle_w: 100.0, peak_w: 200.0, pue: 1.2 }
    }
}

impl PowerParams {
    pub fn new(idle_w: f64, peak_w: f64, pue: f64) -> Result<Self, EnergyError> {
        let p = PowerParams { idle_w, peak_w, pue };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.idle_w > 0.0 && self.peak_w > self.idle_w && self.pue >= 1.0) {
            return Err(EnergyError::InvalidParams(format!(
                "need peak > idle > 0 and pue >= 1, got idle={} peak={} pue={}",
                self.idle_w, self.peak_w, self.pue
            )));
        }
        Ok(())
    }

    /// `P^s = P^i + (η - 1)·P^p`.
    pub fn static_power(&self) -> f64 {
        self.idle_w + (self.pue - 1.0) * self.peak_w
    }

    /// Dynamic watts per busy core, `(P^p - P^i) / φ`.
    pub fn dynamic_per_core(&self, cores_per_server: u32) -> f64 {
        (self.peak_w - self.idle_w) / f64::from(cores_per_server)
    }

    pub fn server_power(&self, used_cores: u32, cores_per_server: u32) -> f64 {
        server_power(self, used_cores, cores_per_server)
    }
}

/// Power of one server with `used_cores` of `cores_per_server` busy.
pub fn server_power(params: &PowerParams, used_cores: u32, cores_per_server: u32) -> f64 {
    let u = f64::from(used_cores) / f64::from(cores_per_server);
    params.static_power() + (params.peak_w - params.idle_w) * u
}

/// Which servers draw static power.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticPowerMode {
    /// Idle servers stay on: every server draws `P^s`.
    #[default]
    AllServers,
    /// Only servers hosting at least one VM draw power.
    ActiveServers,
}

/// Power parameters together with the static-power reading in force.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub power: PowerParams,
    pub static_mode: StaticPowerMode,
}

impl EnergyModel {
    /// Total draw of a set of servers given their busy-core counts.
    pub fn servers_power(&self, used: impl IntoIterator<Item = u32>, cores_per_server: u32) -> f64 {
        used.into_iter()
            .filter(|&u| u > 0 || self.static_mode == StaticPowerMode::AllServers)
            .map(|u| server_power(&self.power, u, cores_per_server))
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerState {
    pub used_cores: u32,
    pub hosted: BTreeSet<VmId>,
}

/// A user request served by one VM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmRequest {
    pub id: VmId,
    pub home_dc: DcId,
    /// CPU cores `ψ`.
    pub cores: u32,
    /// Migration bandwidth `ς` in Gbps.
    pub bandwidth_gbps: f64,
    #[serde(default)]
    pub migrated_to: Option<DcId>,
}

impl VmRequest {
    /// Datacenter currently hosting the VM.
    pub fn location(&self) -> DcId {
        self.migrated_to.unwrap_or(self.home_dc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Datacenter {
    pub id: DcId,
    pub servers: Vec<ServerState>,
    pub cores_per_server: u32,
    /// α, cents per watt over one cycle.
    pub energy_price: f64,
    /// β, cents per migration unit.
    pub migration_price: f64,
    /// ξ, renewable watts available this cycle.
    pub renewable_budget: f64,
}

/// Where each VM of a placement landed.
pub type Placement = Vec<(VmId, usize)>;

/// First-fit-decreasing: items by cores descending (ties by VM id), each
/// into the lowest-index server with room. Mutates `free` on success only.
fn ffd(free: &mut [u32], items: &[(VmId, u32)]) -> Option<Placement> {
    let mut order: Vec<(VmId, u32)> = items.to_vec();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut scratch = free.to_vec();
    let mut out = Vec::with_capacity(order.len());
    for (vm, cores) in order {
        let slot = scratch.iter().position(|&f| f >= cores)?;
        scratch[slot] -= cores;
        out.push((vm, slot));
    }
    free.copy_from_slice(&scratch);
    Some(out)
}

impl Datacenter {
    pub fn new(
        id: DcId,
        num_servers: usize,
        cores_per_server: u32,
        energy_price: f64,
        migration_price: f64,
        renewable_budget: f64,
    ) -> Self {
        assert!(num_servers >= 1, "a datacenter needs at least one server");
        assert!(renewable_budget >= 0.0, "renewable budget must be non-negative");
        Datacenter {
            id,
            servers: vec![ServerState::default(); num_servers],
            cores_per_server,
            energy_price,
            migration_price,
            renewable_budget,
        }
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn used_cores(&self) -> u32 {
        self.servers.iter().map(|s| s.used_cores).sum()
    }

    pub fn capacity_cores(&self) -> u32 {
        self.cores_per_server * self.servers.len() as u32
    }

    pub fn free_cores(&self) -> u32 {
        self.capacity_cores() - self.used_cores()
    }

    fn free_vector(&self) -> Vec<u32> {
        self.servers.iter().map(|s| self.cores_per_server - s.used_cores).collect()
    }

    /// Spare capacity in cores, `Σ_n (1 - u_n)·φ`.
    pub fn spare_cores(&self) -> f64 {
        f64::from(self.free_cores())
    }

    pub fn power(&self, model: &EnergyModel) -> f64 {
        model.servers_power(self.servers.iter().map(|s| s.used_cores), self.cores_per_server)
    }

    /// `Φ_m = max(power - ξ_m, 0)`.
    pub fn brown_energy(&self, model: &EnergyModel) -> f64 {
        (self.power(model) - self.renewable_budget).max(0.0)
    }

    /// Renewable watts left unused, negative when the DC draws brown power.
    pub fn headroom(&self, model: &EnergyModel) -> f64 {
        self.renewable_budget - self.power(model)
    }

    pub fn can_host(&self, vms: &[&VmRequest]) -> bool {
        let items: Vec<(VmId, u32)> = vms.iter().map(|v| (v.id, v.cores)).collect();
        ffd(&mut self.free_vector(), &items).is_some()
    }

    /// Power the DC would draw after FFD-placing `vms`, or `None` if they
    /// do not fit.
    pub fn power_with(&self, model: &EnergyModel, vms: &[&VmRequest]) -> Option<f64> {
        let items: Vec<(VmId, u32)> = vms.iter().map(|v| (v.id, v.cores)).collect();
        let mut free = self.free_vector();
        ffd(&mut free, &items)?;
        Some(model.servers_power(free.iter().map(|f| self.cores_per_server - f), self.cores_per_server))
    }

    /// Power after removing `vms`, which must be hosted here.
    pub fn power_without(&self, model: &EnergyModel, vms: &[&VmRequest]) -> Result<f64, EnergyError> {
        let mut used: Vec<u32> = self.servers.iter().map(|s| s.used_cores).collect();
        for vm in vms {
            let n = self.server_of(vm.id).ok_or(EnergyError::NotHosted { dc: self.id, vm: vm.id })?;
            used[n] -= vm.cores;
        }
        Ok(model.servers_power(used, self.cores_per_server))
    }

    pub fn server_of(&self, vm: VmId) -> Option<usize> {
        self.servers.iter().position(|s| s.hosted.contains(&vm))
    }

    /// Places VMs first-fit-decreasing by cores (ties by VM id). Fails
    /// without touching the DC if they do not all fit.
    pub fn place_vms(&mut self, vms: &[&VmRequest]) -> Result<Placement, EnergyError> {
        if let Some(v) = vms.iter().find(|v| self.server_of(v.id).is_some()) {
            return Err(EnergyError::AlreadyHosted { dc: self.id, vm: v.id });
        }
        let items: Vec<(VmId, u32)> = vms.iter().map(|v| (v.id, v.cores)).collect();
        let mut free = self.free_vector();
        let Some(placement) = ffd(&mut free, &items) else {
            let vm = vms.iter().max_by_key(|v| v.cores).map_or(VmId(0), |v| v.id);
            return Err(EnergyError::Capacity { dc: self.id, vm });
        };
        for &(vm, n) in &placement {
            let cores = items.iter().find(|(id, _)| *id == vm).unwrap().1;
            self.servers[n].used_cores += cores;
            self.servers[n].hosted.insert(vm);
        }
        Ok(placement)
    }

    pub fn remove_vms(&mut self, vms: &[&VmRequest]) -> Result<(), EnergyError> {
        let mut located = Vec::with_capacity(vms.len());
        for vm in vms {
            let n = self.server_of(vm.id).ok_or(EnergyError::NotHosted { dc: self.id, vm: vm.id })?;
            located.push((n, vm));
        }
        for (n, vm) in located {
            self.servers[n].hosted.remove(&vm.id);
            self.servers[n].used_cores -= vm.cores;
        }
        Ok(())
    }
}

/// Exact bin packing: assigns each item (cores) to one of `bins` servers of
/// `capacity` cores, or `None` if impossible. Items are tried largest
/// first; bins with identical remaining room are treated as symmetric.
pub fn pack_exact(items: &[u32], bins: usize, capacity: u32) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].cmp(&items[a]).then(a.cmp(&b)));
    if items.iter().any(|&c| c > capacity) || items.iter().map(|&c| u64::from(c)).sum::<u64>() > bins as u64 * u64::from(capacity) {
        return None;
    }
    let mut room = vec![capacity; bins];
    let mut assign = vec![0; items.len()];
    fn go(k: usize, order: &[usize], items: &[u32], room: &mut [u32], assign: &mut [usize]) -> bool {
        if k == order.len() {
            return true;
        }
        let item = order[k];
        let need = items[item];
        let mut tried: Vec<u32> = Vec::new();
        for b in 0..room.len() {
            if room[b] < need || tried.contains(&room[b]) {
                continue;
            }
            tried.push(room[b]);
            room[b] -= need;
            assign[item] = b;
            if go(k + 1, order, items, room, assign) {
                return true;
            }
            room[b] += need;
        }
        false
    }
    go(0, &order, items, &mut room, &mut assign).then_some(assign)
}

/// Fewest servers of `capacity` cores that can host `items`, up to `max_bins`.
pub fn min_servers(items: &[u32], capacity: u32, max_bins: usize) -> Option<usize> {
    let total: u64 = items.iter().map(|&c| u64::from(c)).sum();
    let lower = total.div_ceil(u64::from(capacity)) as usize;
    (lower..=max_bins).find(|&b| pack_exact(items, b, capacity).is_some())
}

impl EnergyModel {
    /// Lowest power a DC of `num_servers` servers can draw while hosting
    /// VMs with the given core counts, or `None` if they cannot be packed.
    pub fn best_power(&self, items: &[u32], num_servers: usize, cores_per_server: u32) -> Option<f64> {
        let cores: u32 = items.iter().sum();
        let dynamic = (self.power.peak_w - self.power.idle_w) * f64::from(cores) / f64::from(cores_per_server);
        let servers = match self.static_mode {
            StaticPowerMode::AllServers => {
                pack_exact(items, num_servers, cores_per_server)?;
                num_servers
            }
            StaticPowerMode::ActiveServers => min_servers(items, cores_per_server, num_servers)?,
        };
        Some(servers as f64 * self.power.static_power() + dynamic)
    }

    /// A lower bound on the power of a DC hosting `cores` cores in total.
    pub fn power_lower_bound(&self, cores: u32, num_servers: usize, cores_per_server: u32) -> f64 {
        let servers = match self.static_mode {
            StaticPowerMode::AllServers => num_servers,
            StaticPowerMode::ActiveServers => cores.div_ceil(cores_per_server) as usize,
        };
        let dynamic = (self.power.peak_w - self.power.idle_w) * f64::from(cores) / f64::from(cores_per_server);
        servers as f64 * self.power.static_power() + dynamic
    }
}

pub fn dc_power(dc: &Datacenter, model: &EnergyModel) -> f64 {
    dc.power(model)
}

pub fn brown_energy(dc: &Datacenter, model: &EnergyModel) -> f64 {
    dc.brown_energy(model)
}

pub fn can_host(dc: &Datacenter, vms: &[&VmRequest]) -> bool {
    dc.can_host(vms)
}

/// `obj2 = Σ_m α_m·Φ_m`.
pub fn brown_cost(dcs: &[Datacenter], model: &EnergyModel) -> f64 {
    dcs.iter().map(|dc| dc.energy_price * dc.brown_energy(model)).sum()
}

/// Migration charge of a set of lightpaths given as `(source, θ in Gbps)`:
/// each costs `β_source·(θ + 1)`, i.e. migrated bandwidth plus one unit per
/// lightpath used.
pub fn migration_cost(dcs: &[Datacenter], lightpaths: impl IntoIterator<Item = (DcId, f64)>) -> f64 {
    lightpaths
        .into_iter()
        .map(|(src, theta)| {
            let beta = dcs.iter().find(|d| d.id == src).map_or(0.0, |d| d.migration_price);
            beta * (theta + 1.0)
        })
        .sum()
}

/// `obj = obj2 + Σ_m β_m·(Σ_i z·ς + Σ_h Σ_p y)`.
pub fn objective(
    dcs: &[Datacenter],
    model: &EnergyModel,
    lightpaths: impl IntoIterator<Item = (DcId, f64)>,
) -> f64 {
    brown_cost(dcs, model) + migration_cost(dcs, lightpaths)
}
