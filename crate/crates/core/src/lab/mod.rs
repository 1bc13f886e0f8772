//! Config-driven experiment runner behind the `lab` binary.

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{LabError, Result};
use crate::mesh::save_mesh;
pub use config::{CheckId, Geometry, ResolvedScenario, Scenario, SuiteConfig};
pub use run::{fitted_order, generate_mesh, run_scenario, CheckOutcome, ScenarioOutcome};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub dump_operators: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

/// Runs all scenarios, in parallel when `jobs` allows. Results come back in
/// config order whatever the schedule.
pub fn run_all(scenarios: &[ResolvedScenario], opts: &RunOptions) -> Result<Vec<ScenarioOutcome>> {
    let dump = opts.dump_operators.then(|| opts.out_dir.join("operators"));
    let work = || scenarios.par_iter().map(|sc| run_scenario(sc, dump.as_deref())).collect::<Vec<_>>();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| LabError::InvalidParams(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

pub fn report_json(outcome: &ScenarioOutcome) -> Value {
    json!({ "data": outcome.data(), "timing": outcome.timing() })
}

/// Writes one JSON report per scenario plus `summary.csv`.
pub fn write_reports(outcomes: &[ScenarioOutcome], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    for o in outcomes {
        let path = out_dir.join(format!("{}.json", o.scenario.name));
        let text = serde_json::to_string_pretty(&report_json(o)).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    }
    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["scenario", "check", "status", "lhs", "rhs", "gap", "tolerance", "equality"]).map_err(|e| io_err(&path, e))?;
    for o in outcomes {
        for (id, c) in &o.checks {
            let row = match c {
                CheckOutcome::Report(r) => vec![
                    o.scenario.name.clone(),
                    id.name(),
                    status_label(c),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.gap.to_string(),
                    r.tolerance.to_string(),
                    r.equality.to_string(),
                ],
                CheckOutcome::Error(e) => {
                    vec![o.scenario.name.clone(), id.name(), format!("error:{}", e.kind), String::new(), String::new(), String::new(), String::new(), String::new()]
                }
            };
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))
}

pub fn status_label(c: &CheckOutcome) -> String {
    match c {
        CheckOutcome::Report(r) => serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        CheckOutcome::Error(e) => format!("error:{}", e.kind),
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub scenario: String,
    pub check: String,
    pub level: usize,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub order: Option<f64>,
}

pub fn convergence_rows(outcomes: &[ScenarioOutcome]) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for o in outcomes {
        for (id, c) in &o.checks {
            if let CheckOutcome::Report(r) = c {
                let order = fitted_order(&r.history);
                for rec in &r.history {
                    rows.push(ConvergenceRow { scenario: o.scenario.name.clone(), check: id.name(), level: rec.level, h: rec.h, lhs: rec.lhs, rhs: rec.rhs, gap: rec.gap, order });
                }
            }
        }
    }
    rows
}

pub fn format_order(order: Option<f64>) -> String {
    order.map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}"))
}

pub fn write_convergence(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["scenario", "check", "level", "h", "lhs", "rhs", "gap", "order"]).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([r.scenario.clone(), r.check.clone(), r.level.to_string(), r.h.to_string(), r.lhs.to_string(), r.rhs.to_string(), r.gap.to_string(), format_order(r.order)])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Parses `name:key=value,key=value` into a geometry, e.g.
/// `icosphere:radius=1,subdivisions=3`.
pub fn parse_mesh_spec(spec: &str) -> Result<Geometry> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut obj = serde_json::Map::new();
    obj.insert("generator".into(), Value::String(name.trim().to_string()));
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| LabError::InvalidParams(format!("expected key=value, got '{kv}'")))?;
        let v = v.trim();
        let value = if let Some(list) = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let items: std::result::Result<Vec<Value>, _> = list.split(';').map(|x| x.trim().parse::<f64>().map(Value::from)).collect();
            Value::Array(items.map_err(|e| LabError::InvalidParams(format!("{k}: {e}")))?)
        } else if let Ok(i) = v.parse::<u64>() {
            Value::from(i)
        } else if let Ok(x) = v.parse::<f64>() {
            Value::from(x)
        } else {
            Value::String(v.to_string())
        };
        obj.insert(k.trim().to_string(), value);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| LabError::InvalidParams(format!("mesh spec '{spec}': {e}")))
}

pub fn mesh_gen(spec: &str, out: &Path) -> Result<()> {
    let g = parse_mesh_spec(spec)?;
    let mesh = generate_mesh(&g)?;
    save_mesh(&mesh, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_spec_parsing() {
        assert_eq!(parse_mesh_spec("icosphere:radius=1,subdivisions=2").unwrap(), Geometry::Icosphere { radius: 1.0, subdivisions: 2 });
        assert_eq!(
            parse_mesh_spec("wedge_off_center:center=[0.1;0.2],radius=1,opening_angle=1.5,n_rings=4").unwrap(),
            Geometry::WedgeOffCenter { center: [0.1, 0.2], radius: 1.0, opening_angle: 1.5, n_rings: 4, cutoff_ratio: 1e-3 }
        );
        assert!(parse_mesh_spec("icosphere:radius=1").is_err());
        assert!(parse_mesh_spec("blob:x=1").is_err());
    }
}
