use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

/// Ordered run record, rendered as `key=value` lines and as JSON.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, Value)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Null => "-".to_string(),
                other => other.to_string(),
            };
            out.push_str(k);
            out.push('=');
            out.push_str(&text);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let map: Map<String, Value> = self.entries.iter().cloned().collect();
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Writes `<stem>.manifest.txt` and `<stem>.manifest.json` next to `output`.
    pub fn write_beside(&self, output: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let stem = output.with_extension("");
        let txt = PathBuf::from(format!("{}.manifest.txt", stem.display()));
        let json = PathBuf::from(format!("{}.manifest.json", stem.display()));
        fs::write(&txt, self.to_key_value())?;
        fs::write(&json, self.to_json())?;
        Ok((txt, json))
    }
}
