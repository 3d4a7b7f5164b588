use super::{Topology, TopologyError};

const SIX_NODE: &str = include_str!("../../presets/six-node.toml");
const NSFNET: &str = include_str!("../../presets/nsfnet.toml");

pub const PRESET_NAMES: &[&str] = &["six-node", "nsfnet"];

/// Loads one of the embedded topologies (`six-node`, `nsfnet`).
pub fn preset(name: &str) -> Result<Topology, TopologyError> {
    let text = match name {
        "six-node" => SIX_NODE,
        "nsfnet" => NSFNET,
        other => return Err(TopologyError::UnknownPreset(other.to_string())),
    };
    Topology::from_toml_str(text)
}
