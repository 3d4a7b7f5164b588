use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{PowerParams, StaticPowerMode};
use crate::exact::ExactLimits;
use crate::heuristics::{Algorithm, NetworkParams};
use crate::topology::{ModulationTable, Topology};
use crate::workload::{PriceModel, RequestMode, ScenarioConfig};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error("invalid spec field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SpecError {
    SpecError::Invalid { field, reason: reason.into() }
}

/// Default parameter sets. `paper` mirrors the full-scale simulation
/// table; `desk` shrinks datacenters and loads tenfold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Paper,
    Desk,
}

/// A full-factorial sweep over algorithms, `υ_max` values and loads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub profile: Profile,
    /// Preset name or topology file.
    pub topology: String,
    pub algorithms: Vec<Algorithm>,
    pub umax: Vec<f64>,
    /// Mean requests per datacenter.
    pub loads: Vec<f64>,
    pub replications: u64,
    /// Replication `r` draws its scenario from `seed + r`.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max: Option<usize>,
    pub kappa_gbps: f64,
    pub guard_slots: usize,
    pub k_paths: usize,
    pub slot_rate_gbps: f64,
    pub modulation: ModulationTable,
    pub request_mode: RequestMode,
    pub servers_per_dc: usize,
    pub cores_per_server: u32,
    pub psi_range: (u32, u32),
    pub sigma_range_gbps: (f64, f64),
    pub xi_fraction_range: (f64, f64),
    pub energy_prices: PriceModel,
    pub migration_price: f64,
    pub power: PowerParams,
    pub static_mode: StaticPowerMode,
    /// Also solve every cell exactly (tiny instances only).
    pub oracle: bool,
    pub oracle_limits: ExactLimits,
    /// Write a JSON state snapshot per cell for `validate`.
    pub snapshots: bool,
    pub ilp_row_budget: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::for_profile(Profile::Paper)
    }
}

impl ExperimentSpec {
    pub fn for_profile(profile: Profile) -> Self {
        let scenario = ScenarioConfig::default();
        let net = NetworkParams::default();
        let (servers, loads, replications) = match profile {
            Profile::Paper => (100, (0..8).map(|k| 400.0 + 40.0 * f64::from(k)).collect(), 200),
            Profile::Desk => (10, (0..8).map(|k| 40.0 + 4.0 * f64::from(k)).collect(), 20),
        };
        ExperimentSpec {
            profile,
            topology: "nsfnet".into(),
            algorithms: Algorithm::ALL.to_vec(),
            umax: vec![0.5, 1.0],
            loads,
            replications,
            seed: 1,
            h_max: net.h_max,
            kappa_gbps: net.kappa_gbps,
            guard_slots: net.guard_slots,
            k_paths: net.k_paths,
            slot_rate_gbps: net.slot_rate_gbps,
            modulation: net.modulation,
            request_mode: scenario.mode,
            servers_per_dc: servers,
            cores_per_server: scenario.cores_per_server,
            psi_range: scenario.psi_range,
            sigma_range_gbps: scenario.sigma_range_gbps,
            xi_fraction_range: scenario.xi_fraction_range,
            energy_prices: scenario.energy_prices,
            migration_price: scenario.migration_price,
            power: scenario.power,
            static_mode: scenario.static_mode,
            oracle: false,
            oracle_limits: ExactLimits::default(),
            snapshots: false,
            ilp_row_budget: 1_000_000,
            out_dir: PathBuf::from("results"),
        }
    }

    /// Parses a TOML spec. Keys left out take the chosen profile's values.
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        // A first typed pass reports unknown keys and type errors with
        // their position in the file.
        let typed: ExperimentSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| SpecError::Parse(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::for_profile(typed.profile))
            .map_err(|e| SpecError::Parse(e.to_string()))?;
        for (k, v) in user {
            merged.insert(k, v);
        }
        let spec: ExperimentSpec = merged.try_into().map_err(|e: toml::de::Error| SpecError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self, SpecError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Read { path: path.into(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "at least one algorithm is required"));
        }
        if self.umax.is_empty() {
            return Err(invalid("umax", "at least one value is required"));
        }
        if let Some(u) = self.umax.iter().find(|u| !(**u > 0.0 && **u <= 1.0)) {
            return Err(invalid("umax", format!("{u} is outside (0, 1]")));
        }
        if self.loads.is_empty() {
            return Err(invalid("loads", "at least one load is required"));
        }
        if self.replications < 1 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if self.h_max == Some(0) {
            return Err(invalid("h_max", "must be at least 1 when set"));
        }
        if !(self.kappa_gbps > 0.0) {
            return Err(invalid("kappa_gbps", "must be positive"));
        }
        if self.k_paths < 1 {
            return Err(invalid("k_paths", "must be at least 1"));
        }
        if !(self.slot_rate_gbps > 0.0) {
            return Err(invalid("slot_rate_gbps", "must be positive"));
        }
        self.power.validate().map_err(|e| invalid("power", e.to_string()))?;
        for &load in &self.loads {
            self.scenario(load, 0)
                .validate()
                .map_err(|e| SpecError::Invalid { field: "loads", reason: e.to_string() })?;
        }
        Ok(())
    }

    pub fn load_topology(&self) -> Result<Topology, SpecError> {
        Topology::resolve(&self.topology).map_err(|e| invalid("topology", e.to_string()))
    }

    pub fn network(&self, umax: f64) -> NetworkParams {
        NetworkParams {
            k_paths: self.k_paths,
            kappa_gbps: self.kappa_gbps,
            guard_slots: self.guard_slots,
            umax,
            h_max: self.h_max,
            modulation: self.modulation.clone(),
            slot_rate_gbps: self.slot_rate_gbps,
        }
    }

    /// Scenario of one replication at one load.
    pub fn scenario(&self, load: f64, replication: u64) -> ScenarioConfig {
        ScenarioConfig {
            requests_per_dc: load,
            mode: self.request_mode,
            psi_range: self.psi_range,
            sigma_range_gbps: self.sigma_range_gbps,
            xi_fraction_range: self.xi_fraction_range,
            energy_prices: self.energy_prices.clone(),
            migration_price: self.migration_price,
            servers_per_dc: self.servers_per_dc,
            cores_per_server: self.cores_per_server,
            power: self.power,
            static_mode: self.static_mode,
            seed: self.seed + replication,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_is_the_paper_profile() {
        let spec = ExperimentSpec::from_toml_str("").unwrap();
        assert_eq!(spec, ExperimentSpec::for_profile(Profile::Paper));
        assert_eq!(spec.servers_per_dc, 100);
        assert_eq!(spec.cores_per_server, 16);
        assert_eq!(spec.k_paths, 3);
        assert_eq!(spec.kappa_gbps, 100.0);
        assert_eq!(spec.slot_rate_gbps, 12.5);
        assert_eq!(spec.loads.first(), Some(&400.0));
        assert_eq!(spec.loads.last(), Some(&680.0));
    }

    #[test]
    fn desk_profile_with_overrides() {
        let spec = ExperimentSpec::from_toml_str("profile = \"desk\"\nreplications = 3\numax = [1.0]\n").unwrap();
        assert_eq!(spec.servers_per_dc, 10);
        assert_eq!(spec.loads, vec![40.0, 44.0, 48.0, 52.0, 56.0, 60.0, 64.0, 68.0]);
        assert_eq!(spec.replications, 3);
        assert_eq!(spec.umax, vec![1.0]);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentSpec::from_toml_str("umax = [0.0]").unwrap_err();
        assert!(err.to_string().contains("`umax`"), "{err}");
        let err = ExperimentSpec::from_toml_str("replications = 0").unwrap_err();
        assert!(err.to_string().contains("`replications`"), "{err}");
        let err = ExperimentSpec::from_toml_str("replicatoins = 2").unwrap_err();
        assert!(err.to_string().contains("replicatoins"), "{err}");
        let err = ExperimentSpec::from_toml_str("algorithms = [\"xyz\"]").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let spec = ExperimentSpec::for_profile(Profile::Desk);
        assert_eq!(ExperimentSpec::from_toml_str(&spec.to_toml()).unwrap(), spec);
    }
}
