//! Scenario randomization and the network-relaxed workload allocation that
//! seeds the migration demand.
//!
//! Draws are split across independent ChaCha streams: one for prices and
//! renewable budgets, one per datacenter for its request count and VM
//! attributes. Request counts come from the Poisson inverse CDF applied to
//! a single uniform, so for a fixed seed a higher mean never yields fewer
//! requests and the lower-load request list is a prefix of the higher one.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use thiserror::Error;

use crate::energy::{
    brown_cost, Datacenter, DcId, EnergyModel, PowerParams, StaticPowerMode, VmId, VmRequest,
};
use crate::topology::NodeId;

/// Energy prices (cents per watt-cycle) listed per node in the reference
/// parameter table; assigned to datacenters in order, cycling if needed.
pub const REFERENCE_ENERGY_PRICES: [f64; 14] = [
    9.09, 11.28, 12.57, 10.88, 12.12, 11.56, 10.60, 12.50, 13.64, 11.54, 14.42, 18.54, 15.81, 12.99,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestMode {
    /// Per-DC counts are Poisson with the configured mean.
    #[default]
    Poisson,
    /// Every DC gets exactly the configured count.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriceModel {
    /// Prices taken in order from the list, cycling over datacenters.
    Table { prices: Vec<f64> },
    /// Independent uniform draw per datacenter.
    Uniform { min: f64, max: f64 },
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel::Table { prices: REFERENCE_ENERGY_PRICES.to_vec() }
    }
}

/// Everything needed to draw one migration-cycle scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub requests_per_dc: f64,
    pub mode: RequestMode,
    /// Inclusive range of VM core counts `ψ`.
    pub psi_range: (u32, u32),
    /// Range of VM migration bandwidths `ς` in Gbps.
    pub sigma_range_gbps: (f64, f64),
    /// Renewable budget as a fraction of the DC's peak facility power.
    pub xi_fraction_range: (f64, f64),
    pub energy_prices: PriceModel,
    /// β in cents per migration unit.
    pub migration_price: f64,
    /// Servers per datacenter `c_m`.
    pub servers_per_dc: usize,
    /// Cores per server `φ`.
    pub cores_per_server: u32,
    pub power: PowerParams,
    pub static_mode: StaticPowerMode,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            requests_per_dc: 400.0,
            mode: RequestMode::Poisson,
            psi_range: (1, 3),
            sigma_range_gbps: (2.0, 20.0),
            xi_fraction_range: (0.3, 1.0),
            energy_prices: PriceModel::default(),
            migration_price: 0.1,
            servers_per_dc: 100,
            cores_per_server: 16,
            power: PowerParams::default(),
            static_mode: StaticPowerMode::AllServers,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn energy_model(&self) -> EnergyModel {
        EnergyModel { power: self.power, static_mode: self.static_mode }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.requests_per_dc.is_finite() && self.requests_per_dc > 0.0) {
            return Err(invalid("requests_per_dc", "must be positive"));
        }
        if self.mode == RequestMode::Fixed && self.requests_per_dc.fract() != 0.0 {
            return Err(invalid("requests_per_dc", "fixed mode needs a whole number"));
        }
        let (lo, hi) = self.psi_range;
        if lo == 0 || lo > hi || hi > self.cores_per_server {
            return Err(invalid("psi_range", "need 1 <= min <= max <= cores_per_server"));
        }
        let (lo, hi) = self.sigma_range_gbps;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("sigma_range_gbps", "need 0 < min <= max"));
        }
        let (lo, hi) = self.xi_fraction_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("xi_fraction_range", "need 0 <= min <= max"));
        }
        match &self.energy_prices {
            PriceModel::Table { prices } => {
                if prices.is_empty() || prices.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(invalid("energy_prices", "need a non-empty list of non-negative prices"));
                }
            }
            PriceModel::Uniform { min, max } => {
                if !(*min >= 0.0 && min <= max && max.is_finite()) {
                    return Err(invalid("energy_prices", "need 0 <= min <= max"));
                }
            }
        }
        if !(self.migration_price.is_finite() && self.migration_price >= 0.0) {
            return Err(invalid("migration_price", "must be non-negative"));
        }
        if self.servers_per_dc == 0 {
            return Err(invalid("servers_per_dc", "must be at least 1"));
        }
        if self.cores_per_server == 0 {
            return Err(invalid("cores_per_server", "must be at least 1"));
        }
        self.power.validate().map_err(|e| invalid("power", e.to_string()))
    }
}

/// One drawn cycle: datacenters with every accepted request placed at home.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDraw {
    pub dcs: Vec<Datacenter>,
    pub requests: Vec<VmRequest>,
    /// Requests that did not fit in their home DC and were dropped.
    pub rejected: usize,
    pub rng_seed: u64,
}

impl ScenarioDraw {
    pub fn request(&self, id: VmId) -> Option<&VmRequest> {
        self.requests.iter().find(|r| r.id == id)
    }

    pub fn requests_at(&self, dc: DcId) -> impl Iterator<Item = &VmRequest> {
        self.requests.iter().filter(move |r| r.location() == dc)
    }

    pub fn renewable(&self) -> Vec<f64> {
        self.dcs.iter().map(|d| d.renewable_budget).collect()
    }
}

const PRICE_STREAM: u64 = 0;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Renewable budgets, uniform in `[lo·P^p·c_m·η, hi·P^p·c_m·η]` per DC.
pub fn draw_renewable(rng: &mut impl Rng, config: &ScenarioConfig, num_dcs: usize) -> Vec<f64> {
    let peak = config.power.peak_w * config.servers_per_dc as f64 * config.power.pue;
    let (lo, hi) = config.xi_fraction_range;
    (0..num_dcs).map(|_| uniform(rng, lo * peak, hi * peak)).collect()
}

fn request_count(config: &ScenarioConfig, rng: &mut impl Rng) -> u64 {
    match config.mode {
        RequestMode::Fixed => config.requests_per_dc as u64,
        RequestMode::Poisson => {
            let u: f64 = rng.random();
            Poisson::new(config.requests_per_dc).expect("validated mean").inverse_cdf(u)
        }
    }
}

/// VM ids encode the home DC index so they do not shift with other DCs' counts.
const IDS_PER_DC: u32 = 1_000_000;

/// Draws prices, renewable budgets and requests for the given datacenter
/// nodes, then places each request at home first-fit in arrival order.
pub fn generate_requests(config: &ScenarioConfig, dc_nodes: &[NodeId]) -> Result<ScenarioDraw, ScenarioError> {
    config.validate()?;
    let seed = config.seed;
    let mut price_rng = stream(seed, PRICE_STREAM);
    let mut prices = Vec::with_capacity(dc_nodes.len());
    for i in 0..dc_nodes.len() {
        prices.push(match &config.energy_prices {
            PriceModel::Table { prices } => prices[i % prices.len()],
            PriceModel::Uniform { min, max } => uniform(&mut price_rng, *min, *max),
        });
    }
    let xi = draw_renewable(&mut price_rng, config, dc_nodes.len());

    let mut dcs = Vec::with_capacity(dc_nodes.len());
    let mut requests = Vec::new();
    let mut rejected = 0;
    for (i, &node) in dc_nodes.iter().enumerate() {
        let mut dc = Datacenter::new(
            node,
            config.servers_per_dc,
            config.cores_per_server,
            prices[i],
            config.migration_price,
            xi[i],
        );
        let mut rng = stream(seed, 1 + i as u64);
        let count = request_count(config, &mut rng);
        for k in 0..count {
            let cores = rng.random_range(config.psi_range.0..=config.psi_range.1);
            let (lo, hi) = config.sigma_range_gbps;
            let bandwidth_gbps = uniform(&mut rng, lo, hi);
            let vm = VmRequest {
                id: VmId(i as u32 * IDS_PER_DC + k as u32),
                home_dc: node,
                cores,
                bandwidth_gbps,
                migrated_to: None,
            };
            if dc.place_vms(&[&vm]).is_ok() {
                requests.push(vm);
            } else {
                rejected += 1;
            }
        }
        dcs.push(dc);
    }
    Ok(ScenarioDraw { dcs, requests, rejected, rng_seed: seed })
}

/// Renewable watts and cores a sink can absorb.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkCapacity {
    pub headroom_w: f64,
    pub free_cores: u32,
}

/// Output of the relaxed allocation: designated out-VMs per source (sorted
/// by ascending bandwidth, ties by id) and the sinks' spare capacity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationDemand {
    pub sources: BTreeMap<DcId, Vec<VmId>>,
    pub sinks: BTreeMap<DcId, SinkCapacity>,
    /// Brown cost after the relaxed moves; a lower bound on what any
    /// network-constrained migration achieves.
    pub relaxed_obj2: f64,
    /// Relaxed destination of every designated VM.
    pub relaxed_targets: BTreeMap<VmId, DcId>,
}

impl MigrationDemand {
    pub fn is_empty(&self) -> bool {
        self.sources.is_empty() || self.sinks.is_empty()
    }

    pub fn designated_count(&self) -> usize {
        self.sources.values().map(Vec::len).sum()
    }
}

struct Move {
    gain: f64,
    sink_headroom: f64,
    s: usize,
    d: usize,
    vm: VmId,
}

impl Move {
    fn better_than(&self, other: &Move) -> bool {
        const EPS: f64 = 1e-9;
        if (self.gain - other.gain).abs() > EPS {
            return self.gain > other.gain;
        }
        if (self.sink_headroom - other.sink_headroom).abs() > EPS {
            return self.sink_headroom > other.sink_headroom;
        }
        (self.s, self.d, self.vm) < (other.s, other.d, other.vm)
    }
}

/// Greedy marginal-cost redistribution ignoring the network.
///
/// Each step considers, for every brown source and every distinct core
/// count among its unmoved VMs, the lowest-bandwidth such VM, and every
/// non-source DC that can take it without going brown. The move with the
/// largest `α_s·ΔΦ_s − β_s·ς` wins (ties: larger sink headroom, then lower
/// indices). Stops when no move has positive gain. A DC that sends never
/// receives and vice versa.
pub fn suboptimal_allocation(dcs: &[Datacenter], requests: &[VmRequest], model: &EnergyModel) -> MigrationDemand {
    let mut state: Vec<Datacenter> = dcs.to_vec();
    let by_id: BTreeMap<VmId, &VmRequest> = requests.iter().map(|r| (r.id, r)).collect();
    let mut hosted: Vec<Vec<VmId>> = state
        .iter()
        .map(|dc| {
            let mut ids: Vec<VmId> = dc.servers.iter().flat_map(|s| s.hosted.iter().copied()).collect();
            ids.sort();
            ids
        })
        .collect();
    let mut senders: BTreeSet<usize> = BTreeSet::new();
    let mut receivers: BTreeSet<usize> = BTreeSet::new();
    let mut designated: BTreeMap<DcId, Vec<VmId>> = BTreeMap::new();
    let mut targets = BTreeMap::new();

    loop {
        let mut best: Option<Move> = None;
        for s in 0..state.len() {
            if receivers.contains(&s) {
                continue;
            }
            let src = &state[s];
            let brown = src.brown_energy(model);
            if brown <= 0.0 {
                continue;
            }
            // Cheapest-to-move VM per core count.
            let mut per_cores: BTreeMap<u32, &VmRequest> = BTreeMap::new();
            for id in &hosted[s] {
                let vm = by_id[id];
                per_cores
                    .entry(vm.cores)
                    .and_modify(|cur| {
                        if vm.bandwidth_gbps.total_cmp(&cur.bandwidth_gbps).then(vm.id.cmp(&cur.id)).is_lt() {
                            *cur = vm;
                        }
                    })
                    .or_insert(vm);
            }
            for vm in per_cores.values() {
                let after = src.power_without(model, &[vm]).expect("vm is hosted");
                let d_phi = brown - (after - src.renewable_budget).max(0.0);
                let gain = src.energy_price * d_phi - src.migration_price * vm.bandwidth_gbps;
                if gain <= 1e-9 {
                    continue;
                }
                for d in 0..state.len() {
                    if d == s || senders.contains(&d) {
                        continue;
                    }
                    let dst = &state[d];
                    let headroom = dst.headroom(model);
                    if headroom <= 0.0 {
                        continue;
                    }
                    match dst.power_with(model, &[vm]) {
                        Some(p) if p <= dst.renewable_budget + 1e-9 => {}
                        _ => continue,
                    }
                    let cand = Move { gain, sink_headroom: headroom, s, d, vm: vm.id };
                    if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                        best = Some(cand);
                    }
                }
            }
        }
        let Some(m) = best else { break };
        let vm = by_id[&m.vm];
        state[m.s].remove_vms(&[vm]).expect("vm is hosted at source");
        state[m.d].place_vms(&[vm]).expect("sink capacity was checked");
        hosted[m.s].retain(|id| *id != m.vm);
        senders.insert(m.s);
        receivers.insert(m.d);
        designated.entry(state[m.s].id).or_default().push(m.vm);
        targets.insert(m.vm, state[m.d].id);
    }

    for list in designated.values_mut() {
        list.sort_by(|a, b| by_id[a].bandwidth_gbps.total_cmp(&by_id[b].bandwidth_gbps).then(a.cmp(b)));
    }
    let sinks = dcs
        .iter()
        .filter(|dc| !designated.contains_key(&dc.id))
        .filter_map(|dc| {
            let headroom = dc.headroom(model);
            (headroom > 0.0 && dc.free_cores() > 0)
                .then_some((dc.id, SinkCapacity { headroom_w: headroom, free_cores: dc.free_cores() }))
        })
        .collect();
    MigrationDemand { sources: designated, sinks, relaxed_obj2: brown_cost(&state, model), relaxed_targets: targets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: u32) -> Vec<NodeId> {
        (1..=n).map(NodeId).collect()
    }

    fn small_config() -> ScenarioConfig {
        ScenarioConfig { servers_per_dc: 1, requests_per_dc: 2.0, mode: RequestMode::Fixed, ..Default::default() }
    }

    #[test]
    fn fixed_mode_counts_exactly() {
        let draw = generate_requests(&small_config(), &nodes(6)).unwrap();
        assert_eq!(draw.requests.len() + draw.rejected, 12);
        assert_eq!(draw.rejected, 0);
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let cfg = ScenarioConfig { seed: 42, servers_per_dc: 10, requests_per_dc: 40.0, ..Default::default() };
        assert_eq!(generate_requests(&cfg, &nodes(14)).unwrap(), generate_requests(&cfg, &nodes(14)).unwrap());
    }

    #[test]
    fn attribute_ranges_hold() {
        let cfg = ScenarioConfig { servers_per_dc: 10, requests_per_dc: 40.0, ..Default::default() };
        let draw = generate_requests(&cfg, &nodes(14)).unwrap();
        for r in &draw.requests {
            assert!((1..=3).contains(&r.cores));
            assert!((2.0..=20.0).contains(&r.bandwidth_gbps));
        }
        for dc in &draw.dcs {
            assert!((0.3 * 2000.0 * 1.2 - 1e-9..=2000.0 * 1.2 + 1e-9).contains(&dc.renewable_budget));
            assert!(dc.used_cores() <= dc.capacity_cores());
        }
    }

    #[test]
    fn renewable_ranges_scale_with_servers() {
        let mut rng = stream(7, 0);
        for (servers, lo, hi) in [(1, 72.0, 240.0), (100, 7200.0, 24000.0)] {
            let cfg = ScenarioConfig { servers_per_dc: servers, ..Default::default() };
            for xi in draw_renewable(&mut rng, &cfg, 200) {
                assert!(xi >= lo - 1e-9 && xi <= hi + 1e-9, "{xi} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn higher_load_is_a_superset() {
        let lo = ScenarioConfig { servers_per_dc: 10, requests_per_dc: 40.0, seed: 3, ..Default::default() };
        let hi = ScenarioConfig { requests_per_dc: 48.0, ..lo.clone() };
        let a = generate_requests(&lo, &nodes(14)).unwrap();
        let b = generate_requests(&hi, &nodes(14)).unwrap();
        assert_eq!(a.renewable(), b.renewable());
        for r in &a.requests {
            assert_eq!(b.request(r.id), Some(r));
        }
    }

    #[test]
    fn poisson_mean_is_close() {
        let mut total = 0u64;
        let n = 10_000u64;
        let cfg = ScenarioConfig::default();
        for k in 0..n {
            total += request_count(&cfg, &mut stream(k, 1));
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 400.0).abs() < 4.0, "sample mean {mean}");
    }

    fn dc(id: u32, xi: f64, alpha: f64) -> Datacenter {
        Datacenter::new(NodeId(id), 1, 16, alpha, 0.1, xi)
    }

    fn vm(id: u32, home: u32, cores: u32, sigma: f64) -> VmRequest {
        VmRequest { id: VmId(id), home_dc: NodeId(home), cores, bandwidth_gbps: sigma, migrated_to: None }
    }

    #[test]
    fn no_brown_no_demand() {
        let m = EnergyModel::default();
        let mut dcs = vec![dc(1, 500.0, 10.0), dc(2, 500.0, 10.0)];
        let v = vm(1, 1, 2, 5.0);
        dcs[0].place_vms(&[&v]).unwrap();
        let demand = suboptimal_allocation(&dcs, &[v], &m);
        assert!(demand.sources.is_empty());
    }

    #[test]
    fn two_dc_moves_the_vm() {
        let m = EnergyModel::default();
        // A draws 146.25 W against 100 W renewable; B has 250 W for 140 W idle.
        let mut dcs = vec![dc(1, 100.0, 10.0), dc(2, 250.0, 10.0)];
        let v = vm(1, 1, 1, 5.0);
        dcs[0].place_vms(&[&v]).unwrap();
        let demand = suboptimal_allocation(&dcs, &[v], &m);
        assert_eq!(demand.sources[&NodeId(1)], vec![VmId(1)]);
        assert_eq!(demand.relaxed_targets[&VmId(1)], NodeId(2));
        assert!((demand.relaxed_obj2 - 400.0).abs() < 1e-9);
    }

    #[test]
    fn full_sinks_give_no_demand() {
        let m = EnergyModel::default();
        let mut dcs = vec![dc(1, 100.0, 10.0), dc(2, 1000.0, 10.0)];
        let v = vm(1, 1, 1, 5.0);
        let filler = vm(2, 2, 16, 5.0);
        dcs[0].place_vms(&[&v]).unwrap();
        dcs[1].place_vms(&[&filler]).unwrap();
        let demand = suboptimal_allocation(&dcs, &[v, filler], &m);
        assert!(demand.sinks.is_empty());
        assert!(demand.is_empty());
    }
}
