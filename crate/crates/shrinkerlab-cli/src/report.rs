use crate::Failure;
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Default)]
pub struct Provenance {
    pub grid: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub oracles: Vec<String>,
}

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_echo: Value,
    pub results: Value,
    pub provenance: Provenance,
    pub pass_flags: BTreeMap<String, bool>,
}

impl Report {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.into(),
            config_echo: serde_json::to_value(config).unwrap_or(Value::Null),
            results: Value::Null,
            provenance: Provenance::default(),
            pass_flags: BTreeMap::new(),
        }
    }

    pub fn grid(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.provenance.grid.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn tolerance(&mut self, key: &str, v: f64) -> &mut Self {
        self.provenance.tolerances.insert(key.into(), v);
        self
    }

    pub fn oracle(&mut self, s: &str) -> &mut Self {
        self.provenance.oracles.push(s.into());
        self
    }

    pub fn flag(&mut self, key: &str, ok: bool) -> &mut Self {
        self.pass_flags.insert(key.into(), ok);
        self
    }

    pub fn passed(&self) -> bool {
        self.pass_flags.values().all(|v| *v)
    }
}

/// Where files go: relative paths land in the output directory when one is set.
#[derive(Clone, Debug)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

impl Output {
    pub fn path(&self, p: &Path) -> PathBuf {
        match &self.dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Resolved path with parent directories created.
    pub fn prepare(&self, p: &Path) -> Result<PathBuf, Failure> {
        let full = self.path(p);
        if let Some(parent) = full.parent().filter(|x| !x.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Failure::Internal(format!("cannot create {}: {e}", parent.display())))?;
        }
        Ok(full)
    }

    /// Write the report to `dest`, or to stdout without one.
    pub fn emit(&self, report: &Report, dest: Option<&Path>) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Internal(e.to_string()))?;
        match dest {
            Some(p) => {
                let full = self.prepare(p)?;
                std::fs::write(&full, text + "\n").map_err(|e| Failure::Internal(format!("cannot write {}: {e}", full.display())))
            }
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}
