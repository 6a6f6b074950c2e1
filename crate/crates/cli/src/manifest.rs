use std::collections::BTreeMap;
use std::time::SystemTime;

use serde::Serialize;

/// Provenance of one invocation, written next to its output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub started: String,
    pub finished: Option<String>,
}

impl RunManifest {
    pub fn start(command: &str, flags: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            flags,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished = Some(now());
    }
}

fn now() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

/// Flattens a serializable argument struct into `flag -> value` strings.
pub fn flag_map<T: Serialize>(args: &T) -> BTreeMap<String, String> {
    let value = serde_json::to_value(args).expect("argument structs serialize");
    let mut out = BTreeMap::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string))
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.insert(k.replace('_', "-"), text);
        }
    }
    out
}
