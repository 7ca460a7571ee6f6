//! JSON analysis reports. A report carries the command, the resolved
//! parameters, the seed and input paths next to the result, which is enough
//! to rerun it. No timestamps or host names are recorded, so reports are
//! byte-stable across runs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

use super::write_atomic;

pub const TOOL_NAME: &str = "polardyn";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    /// Every parameter that influenced the result, defaults included.
    pub config: Value,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>, inputs: Vec<String>, config: impl Serialize, result: impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.into(),
            seed,
            inputs,
            config: serde_json::to_value(config)?,
            result: serde_json::to_value(result)?,
        })
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_json_pretty()?;
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_nan_becomes_null() {
        let r = Report::new("g2", Some(3), vec!["a.ttag".into()], serde_json::json!({"p": 1}), serde_json::json!({"x": f64::NAN}))
            .unwrap();
        assert_eq!(r.result["x"], Value::Null);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        r.write(&p).unwrap();
        assert_eq!(Report::read(&p).unwrap(), r);
    }
}
