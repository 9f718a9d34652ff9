//! Serialization of estimates and metrics tables, and atomic file writes.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use transport_core::sim::{MetricsRow, MetricsTable};
use transport_core::{EstimateRecord, TargetEstimates};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so a failed run never leaves a partial file behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| AppError::config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(AppError::io(path, e));
    }
    Ok(())
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => f.to_string(),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn render(fields: &[(String, Value)], format: Format) -> String {
    match format {
        Format::Json => {
            let map: Map<String, Value> = fields.iter().cloned().collect();
            let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(fields.iter().map(|(k, _)| k.as_str())).expect("in-memory write");
            wtr.write_record(fields.iter().map(|(_, v)| cell(v))).expect("in-memory write");
            String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
        }
    }
}

/// Run metadata attached to an estimate.
#[derive(Debug, Clone)]
pub struct EstimateContext {
    pub n1: usize,
    pub n0: usize,
    pub folds: usize,
    pub seed: u64,
    pub level: f64,
    pub warnings: Vec<String>,
}

/// Flat field list: points, then `se_*` and `ci_*` (null when the method
/// has no influence function), then run metadata.
pub fn estimate_fields(points: &TargetEstimates, record: Option<&EstimateRecord>, ctx: &EstimateContext) -> Vec<(String, Value)> {
    let mut f: Vec<(String, Value)> = vec![
        ("method".into(), json!(points.method.name())),
        ("scenario".into(), json!(points.scenario.number())),
        ("alpha".into(), num(points.alpha)),
        ("beta".into(), num(points.beta)),
        ("phi".into(), opt(points.phi)),
        ("psi".into(), num(points.psi)),
    ];
    let se = |g: fn(&EstimateRecord) -> Option<f64>| record.and_then(g);
    f.push(("se_alpha".into(), opt(se(|r| Some(r.se_alpha)))));
    f.push(("se_beta".into(), opt(se(|r| Some(r.se_beta)))));
    f.push(("se_phi".into(), opt(se(|r| r.se_phi))));
    f.push(("se_psi".into(), opt(se(|r| Some(r.se_psi)))));
    let intervals = [
        ("alpha", record.map(|r| r.ci_alpha)),
        ("beta", record.map(|r| r.ci_beta)),
        ("phi", record.and_then(|r| r.ci_phi)),
        ("psi", record.map(|r| r.ci_psi)),
    ];
    for (name, ci) in intervals {
        f.push((format!("ci_{name}_lower"), opt(ci.map(|c| c.lower))));
        f.push((format!("ci_{name}_upper"), opt(ci.map(|c| c.upper))));
    }
    f.push(("level".into(), num(ctx.level)));
    f.push(("n".into(), json!(ctx.n1 + ctx.n0)));
    f.push(("n1".into(), json!(ctx.n1)));
    f.push(("n0".into(), json!(ctx.n0)));
    f.push(("folds".into(), json!(ctx.folds)));
    f.push(("seed".into(), json!(ctx.seed)));
    f
}

pub fn render_estimate(points: &TargetEstimates, record: Option<&EstimateRecord>, ctx: &EstimateContext, format: Format) -> String {
    let mut fields = estimate_fields(points, record, ctx);
    if format == Format::Json {
        fields.push(("warnings".into(), json!(ctx.warnings)));
    }
    render(&fields, format)
}

pub const METRICS_COLUMNS: [&str; 11] =
    ["estimator", "config", "n1", "n0", "reps", "abs_bias", "sd", "sqrt_n_rmse", "coverage", "r1n_diag", "clip_count"];

fn metrics_values(r: &MetricsRow) -> [Value; 11] {
    [
        json!(r.estimator),
        json!(r.config),
        num(r.n1),
        num(r.n0),
        json!(r.reps),
        num(r.abs_bias),
        num(r.sd),
        num(r.sqrt_n_rmse),
        opt(r.coverage),
        opt(r.r1n_diag),
        json!(r.clip_count),
    ]
}

pub fn metrics_csv(table: &MetricsTable) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(METRICS_COLUMNS).expect("in-memory write");
    for row in &table.rows {
        wtr.write_record(metrics_values(row).iter().map(cell)).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
}

pub fn metrics_json(table: &MetricsTable) -> String {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let map: Map<String, Value> =
                METRICS_COLUMNS.iter().map(|k| k.to_string()).zip(metrics_values(r)).collect();
            Value::Object(map)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({ "rows": rows, "warnings": table.warnings })).expect("json");
    s.push('\n');
    s
}

pub fn render_metrics(table: &MetricsTable, format: Format) -> String {
    match format {
        Format::Csv => metrics_csv(table),
        Format::Json => metrics_json(table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use transport_core::sim::metrics::{summarize, Replicate};

    #[test]
    fn metrics_csv_shape() {
        let rep = Replicate { estimate: 1.0, covered: None, r1n: Some(0.5), n1: 10, n0: 20, clip_count: 0 };
        let table = MetricsTable { rows: vec![summarize("or", "all_correct", 1.0, (10, 20), false, 30.0, &[rep])], warnings: vec![] };
        let csv = metrics_csv(&table);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), METRICS_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "or,all_correct,10,20,1,0,0,0,,0.5,0");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
