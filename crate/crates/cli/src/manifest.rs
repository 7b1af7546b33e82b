use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Record of one command invocation. Everything except `wall_seconds` is a
/// function of the command line and the input bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, Value>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            wall_seconds: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.to_string(), to_value(value));
        self
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.metrics.insert(key.to_string(), to_value(value));
        self
    }

    /// Adds every field of a serializable struct as a metric.
    pub fn metrics_from(&mut self, value: impl Serialize) -> &mut Self {
        if let Value::Object(map) = to_value(value) {
            self.metrics.extend(map);
        }
        self
    }

    pub fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn output(&mut self, p: &Path) -> &mut Self {
        self.outputs.push(p.display().to_string());
        self
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Replaces non-finite floats with their string spelling so the manifest
/// stays valid JSON.
pub fn finite_or_string(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}
