//! CSV and JSON emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// C-style `%.12e`: twelve fraction digits and a signed, at least two digit exponent.
pub fn fmt_e(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", e.abs())
}

/// Finite numbers as JSON numbers, everything else as a descriptive string.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::String(fmt_e(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// JSON object from `(key, value)` pairs.
pub fn object<const N: usize>(pairs: [(&str, Value); N]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

pub struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_e(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Output directory plus the list of files written so far.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, t: &CsvTable) -> Result<(), CliError> {
        self.write(name, &t.render())
    }

    pub fn write_json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json` listing every file written before it.
    pub fn finish(
        mut self,
        command: &str,
        parameters: BTreeMap<String, String>,
        seed: u64,
    ) -> Result<Vec<PathBuf>, CliError> {
        let m = RunManifest {
            command: command.to_string(),
            parameters,
            outputs: self
                .written
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            versions: format!("nelson-sta {}", env!("CARGO_PKG_VERSION")),
            seed,
        };
        let v = serde_json::to_value(&m).map_err(|e| CliError::Io(e.to_string()))?;
        self.write_json("manifest.json", &v)?;
        Ok(self.written)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub versions: String,
    pub seed: u64,
}
