use serde::{Deserialize, Serialize};

use super::{Path, TopologyError};

/// One row of a distance-to-modulation table: paths up to `max_km` use
/// `level` bits per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationStep {
    pub max_km: f64,
    pub level: u8,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    #[serde(default)]
    steps: Vec<ModulationStep>,
    #[serde(default = "bpsk")]
    fallback: u8,
}

fn bpsk() -> u8 {
    1
}

/// Maps a path length to the modulation level `L(p)` in `1..=4`.
///
/// Rows are sorted by distance and levels must not increase with distance,
/// so `L` is non-increasing in path length. Lengths beyond the last row use
/// `fallback`. The default table is BPSK (`L = 1`) everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct ModulationTable {
    steps: Vec<ModulationStep>,
    fallback: u8,
}

impl Default for ModulationTable {
    fn default() -> Self {
        ModulationTable { steps: Vec::new(), fallback: 1 }
    }
}

impl ModulationTable {
    pub fn new(mut steps: Vec<ModulationStep>, fallback: u8) -> Result<Self, TopologyError> {
        steps.sort_by(|a, b| a.max_km.total_cmp(&b.max_km));
        let valid = |l: u8| (1..=4).contains(&l);
        if !valid(fallback) || steps.iter().any(|s| !valid(s.level)) {
            return Err(TopologyError::Modulation("levels must be in 1..=4".into()));
        }
        if steps.iter().any(|s| !(s.max_km.is_finite() && s.max_km > 0.0)) {
            return Err(TopologyError::Modulation("distance thresholds must be positive".into()));
        }
        let levels: Vec<u8> = steps.iter().map(|s| s.level).chain([fallback]).collect();
        if levels.windows(2).any(|w| w[1] > w[0]) {
            return Err(TopologyError::Modulation(
                "levels must not increase with distance".into(),
            ));
        }
        Ok(ModulationTable { steps, fallback })
    }

    pub fn level_for_length(&self, length_km: f64) -> u8 {
        self.steps
            .iter()
            .find(|s| length_km <= s.max_km)
            .map_or(self.fallback, |s| s.level)
    }
}

impl TryFrom<RawTable> for ModulationTable {
    type Error = TopologyError;
    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        ModulationTable::new(raw.steps, raw.fallback)
    }
}

impl From<ModulationTable> for RawTable {
    fn from(t: ModulationTable) -> Self {
        RawTable { steps: t.steps, fallback: t.fallback }
    }
}

/// `L(p)` for a path under the given table.
pub fn modulation_level(path: &Path, table: &ModulationTable) -> u8 {
    table.level_for_length(path.length_km())
}
