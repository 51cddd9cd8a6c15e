//! Run records: canonical JSON, content hashes, JSON-lines and CSV output.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One computed point. Serializes with sorted keys, so the JSON text is
/// canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub hash: String,
    pub inputs: Value,
    pub outputs: Value,
    pub timestamp: u64,
    pub version: String,
    #[serde(default)]
    pub cached: bool,
}

impl RunRecord {
    pub fn new(command: &str, inputs: Value, outputs: Value) -> Self {
        RunRecord {
            command: command.to_string(),
            hash: input_hash(command, &inputs),
            inputs,
            outputs,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: TOOL_VERSION.to_string(),
            cached: false,
        }
    }

    pub fn to_json_line(&self) -> String {
        canonical(&serde_json::to_value(self).expect("records serialize"))
    }

    /// `log|delta|` reported by the command, if any.
    pub fn log_delta(&self) -> Option<f64> {
        self.outputs.get("log_delta").and_then(Value::as_f64)
    }
}

/// Canonical text of a JSON value: keys sorted, no whitespace, shortest
/// round-trip floats.
pub fn canonical(value: &Value) -> String {
    // serde_json's default map is ordered, so plain serialization is canonical
    value.to_string()
}

/// Parses one JSON line and re-emits it canonically.
pub fn canonicalize_line(line: &str) -> serde_json::Result<String> {
    let v: Value = serde_json::from_str(line)?;
    Ok(canonical(&v))
}

/// Hex SHA-256 of the canonical `{command, inputs, version}` object.
pub fn input_hash(command: &str, inputs: &Value) -> String {
    let key = serde_json::json!({
        "command": command,
        "inputs": inputs,
        "version": TOOL_VERSION,
    });
    let digest = Sha256::digest(canonical(&key).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Flattens nested objects into dotted keys; arrays become JSON text.
fn flatten_into(prefix: &str, value: &Value, out: &mut BTreeMap<String, String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, v, out);
            }
        }
        Value::Null => {}
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

pub fn flatten(value: &Value) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    flatten_into("", value, &mut out);
    out
}

/// Writes flattened objects as an RFC 4180 table with the union of their
/// keys as header.
pub fn write_csv<W: Write>(rows: &[Value], out: W) -> anyhow::Result<()> {
    let flat: Vec<BTreeMap<String, String>> = rows.iter().map(flatten).collect();
    let mut columns: Vec<String> = flat.iter().flat_map(|r| r.keys().cloned()).collect();
    columns.sort();
    columns.dedup();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&columns)?;
    for row in &flat {
        w.write_record(columns.iter().map(|c| row.get(c).map(String::as_str).unwrap_or("")))?;
    }
    w.flush()?;
    Ok(())
}

/// Object with the given keys, skipping `None` values.
pub fn object(entries: Vec<(&str, Option<Value>)>) -> Value {
    let mut map = Map::new();
    for (k, v) in entries {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    Value::Object(map)
}

/// JSON number for finite floats, `None` otherwise (JSON has no NaN).
pub fn num(x: f64) -> Option<Value> {
    serde_json::Number::from_f64(x).map(Value::Number)
}
