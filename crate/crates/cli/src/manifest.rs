use std::collections::BTreeMap;

use pbt_core::pauli::RNG_ALGORITHM;
use pbt_core::tolerances::Tolerances;
use serde::Serialize;
use serde_json::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun a command. Embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub parameters: BTreeMap<String, Value>,
    pub rng: String,
    pub tolerances: Tolerances,
    /// Only the tolerances changed from their defaults.
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Omitted unless requested, so identical runs give identical bytes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, tolerances: Tolerances, overrides: BTreeMap<String, f64>) -> Self {
        Self {
            command: command.to_string(),
            version: TOOL_VERSION.to_string(),
            parameters: BTreeMap::new(),
            rng: RNG_ALGORITHM.to_string(),
            tolerances,
            tolerance_overrides: overrides,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp: None,
        }
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameters serialize");
        self.parameters.insert(name.to_string(), v);
    }
}
