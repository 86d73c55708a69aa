//! CSV and JSON persistence for flow traces and residual grids.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! finite double reads back bit-identically.

use crate::error::{invalid, LabError, Result};
use crate::graphflow::{graph_push, FlowDiagnostics, FlowTrace, Scheme, Snapshot, Termination};
use crate::shrinker::ShrinkerSurface;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 6] = ["tau", "node_index", "r", "z", "u", "speed"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotMeta {
    tau: f64,
    diagnostics: FlowDiagnostics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSidecar {
    schema_version: u32,
    nodes: usize,
    termination: Termination,
    dt: f64,
    scheme: Scheme,
    detail: Option<String>,
    snapshots: Vec<SnapshotMeta>,
}

fn format_err(e: impl std::fmt::Display) -> LabError {
    LabError::Format(e.to_string())
}

fn check_version(v: &serde_json::Value, expected: u32) -> Result<()> {
    match v.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(x) if x == expected as u64 => Ok(()),
        Some(x) => invalid(format!("unsupported schema_version {x} (expected {expected})")),
        None => Err(LabError::Format("missing schema_version".into())),
    }
}

/// Rows (τ, node, r, z, u, G) per snapshot node, where (r, z) is the graph
/// point x + uν, and a JSON sidecar with run metadata and diagnostics.
pub fn write_trace(base: &ShrinkerSurface, trace: &FlowTrace, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path).map_err(format_err)?;
    w.write_record(TRACE_HEADER).map_err(format_err)?;
    for s in &trace.snapshots {
        let graph = graph_push(base, &s.u)?;
        for (i, x) in graph.nodes.iter().enumerate() {
            let rec = [s.tau.to_string(), i.to_string(), x[0].to_string(), x[1].to_string(), s.u[i].to_string(), s.speed[i].to_string()];
            w.write_record(&rec).map_err(format_err)?;
        }
    }
    w.flush()?;
    let side = TraceSidecar {
        schema_version: TRACE_SCHEMA_VERSION,
        nodes: base.len(),
        termination: trace.termination,
        dt: trace.dt,
        scheme: trace.scheme,
        detail: trace.detail.clone(),
        snapshots: trace.snapshots.iter().map(|s| SnapshotMeta { tau: s.tau, diagnostics: s.diagnostics.clone() }).collect(),
    };
    std::fs::write(sidecar_path, serde_json::to_string_pretty(&side).map_err(format_err)?)?;
    Ok(())
}

fn parse(field: Option<&str>, what: &str, row: usize) -> Result<f64> {
    field
        .ok_or_else(|| LabError::Format(format!("row {row}: missing {what}")))?
        .parse::<f64>()
        .map_err(|e| LabError::Format(format!("row {row}: bad {what}: {e}")))
}

pub fn read_trace(csv_path: &Path, sidecar_path: &Path) -> Result<FlowTrace> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?).map_err(format_err)?;
    check_version(&v, TRACE_SCHEMA_VERSION)?;
    let side: TraceSidecar = serde_json::from_value(v).map_err(format_err)?;
    let mut r = csv::Reader::from_path(csv_path).map_err(format_err)?;
    let header = r.headers().map_err(format_err)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().cloned()) {
        return Err(LabError::Format(format!("unexpected trace header {header:?}")));
    }
    let mut snapshots: Vec<Snapshot> = side
        .snapshots
        .into_iter()
        .map(|m| Snapshot { tau: m.tau, u: Vec::with_capacity(side.nodes), speed: Vec::with_capacity(side.nodes), diagnostics: m.diagnostics })
        .collect();
    let mut count = 0usize;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(format_err)?;
        let (k, i) = (count / side.nodes.max(1), count % side.nodes.max(1));
        let snap = snapshots.get_mut(k).ok_or_else(|| LabError::Format(format!("row {row}: more rows than the sidecar lists")))?;
        let tau = parse(rec.get(0), "tau", row)?;
        let node: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| LabError::Format(format!("row {row}: bad node_index")))?;
        if tau.to_bits() != snap.tau.to_bits() || node != i {
            return Err(LabError::Format(format!("row {row}: expected snapshot tau {} node {i}", snap.tau)));
        }
        snap.u.push(parse(rec.get(4), "u", row)?);
        snap.speed.push(parse(rec.get(5), "speed", row)?);
        count += 1;
    }
    if count != snapshots.len() * side.nodes {
        return Err(LabError::Format(format!("truncated trace: {count} rows, expected {}", snapshots.len() * side.nodes)));
    }
    Ok(FlowTrace { snapshots, termination: side.termination, dt: side.dt, scheme: side.scheme, detail: side.detail })
}

/// Long-format grid: one (row, column, value) line per cell.
pub fn write_grid(path: &Path, row_name: &str, col_name: &str, rows: &[f64], cols: &[f64], values: &[Vec<f64>]) -> Result<()> {
    if values.len() != rows.len() || values.iter().any(|v| v.len() != cols.len()) {
        return invalid("grid shape does not match its labels");
    }
    let mut w = csv::Writer::from_path(path).map_err(format_err)?;
    w.write_record([row_name, col_name, "value"]).map_err(format_err)?;
    for (r, line) in rows.iter().zip(values) {
        for (c, v) in cols.iter().zip(line) {
            w.write_record([r.to_string(), c.to_string(), v.to_string()]).map_err(format_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub type Grid = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

pub fn read_grid(path: &Path) -> Result<Grid> {
    let mut r = csv::Reader::from_path(path).map_err(format_err)?;
    let (mut rows, mut cols, mut values): Grid = (vec![], vec![], vec![]);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(format_err)?;
        let (a, b, v) = (parse(rec.get(0), "row", i)?, parse(rec.get(1), "column", i)?, parse(rec.get(2), "value", i)?);
        if rows.last().map(|x: &f64| x.to_bits()) != Some(a.to_bits()) {
            rows.push(a);
            values.push(vec![]);
        }
        if rows.len() == 1 {
            cols.push(b);
        }
        values.last_mut().unwrap().push(v);
    }
    if values.iter().any(|v| v.len() != cols.len()) {
        return Err(LabError::Format("ragged residual grid".into()));
    }
    Ok((rows, cols, values))
}

/// Single-column series CSV (e.g. an eigenfunction over node index).
pub fn write_series(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let len = columns.first().map_or(0, |c| c.len());
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != len) {
        return invalid("series columns must share a length and have one name each");
    }
    let mut w = csv::Writer::from_path(path).map_err(format_err)?;
    w.write_record(names).map_err(format_err)?;
    for i in 0..len {
        w.write_record(columns.iter().map(|c| c[i].to_string())).map_err(format_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphflow::{BoundaryData, GraphFlow, RunOptions};
    use crate::shrinker::{make_model, Model, ModelParams};

    #[test]
    fn trace_round_trip_is_bit_exact() {
        let s = make_model(Model::Sphere, ModelParams::default(), 100).unwrap();
        let flow = GraphFlow::new(&s, BoundaryData::default());
        let u0: Vec<f64> = s.profile.nodes.iter().map(|x| 0.01 + 0.003 * x[1] / 3.0).collect();
        let trace = flow.run(0.0, &u0, &RunOptions::new(0.1, 0.5, 1)).unwrap();
        assert!(trace.snapshots.len() * s.len() >= 10_000);
        let dir = std::env::temp_dir().join(format!("shrinkerlab-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let (c, j) = (dir.join("t.csv"), dir.join("t.json"));
        write_trace(&s, &trace, &c, &j).unwrap();
        let back = read_trace(&c, &j).unwrap();
        assert_eq!(back, trace);
        let text = std::fs::read_to_string(&c).unwrap();
        std::fs::write(&c, &text[..text.len() / 2]).unwrap();
        assert!(matches!(read_trace(&c, &j), Err(LabError::Format(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn grid_round_trip() {
        let dir = std::env::temp_dir().join(format!("shrinkerlab-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("g.csv");
        let vals = vec![vec![0.1, -1e-300, 3.0], vec![f64::MIN_POSITIVE, 2.5e17, -0.0]];
        write_grid(&p, "tau", "node", &[-1.0, -0.5], &[0.0, 1.0, 2.0], &vals).unwrap();
        let (r, c, v) = read_grid(&p).unwrap();
        assert_eq!((r, c), (vec![-1.0, -0.5], vec![0.0, 1.0, 2.0]));
        assert!(v.iter().flatten().zip(vals.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
