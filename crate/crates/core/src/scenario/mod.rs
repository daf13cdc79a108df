//! Config-driven scenarios, the reduction front end and the verification
//! suite behind the command line tool.
//!
//! Every run writes `diagnostics.csv` (columns `t, E, N, S, Phi, sigma` and
//! scenario extras), initial and final snapshots, and `summary.json`.

pub mod config;
mod reduce;
mod runs;
mod verify;

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

pub use config::{Coupling, Resolved, Scenario, ScenarioConfig};
pub use reduce::{reduce, ReduceKind, ReduceOutcome};
pub use verify::{verify, CheckResult, Mutation, VerifyOptions, VerifyReport, CHECKS};

use crate::dynamics::Diagnostics;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Value,
    pub diagnostics: Diagnostics,
    /// Every file written, summary last.
    pub files: Vec<PathBuf>,
}

/// Runs the configured scenario and writes its artifacts under `out`.
///
/// A non-finite state aborts the run; the last finite state is written to
/// `last_good.csv` before the error is returned.
pub fn run(config: &ScenarioConfig, out: &Path) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    std::fs::create_dir_all(out)?;
    let report = match runs::dispatch(&resolved, out) {
        Ok(r) => r,
        Err(e) => {
            if let Error::NonFinite { last_good, .. } = &e {
                dump(&out.join("last_good.csv"), last_good)?;
            }
            return Err(e);
        }
    };

    let diag_path = out.join("diagnostics.csv");
    report.diagnostics.save(&diag_path)?;
    // Quantities that start at zero (total momentum, say) have no scale, so
    // their drift is reported in absolute terms.
    let mut drifts = Map::new();
    let mut absolute = Map::new();
    for name in &report.conserved {
        let Some(col) = report.diagnostics.column(name) else { continue };
        let Some(&q0) = col.first() else { continue };
        let largest = col.iter().fold(0.0f64, |a, q| a.max(q.abs()));
        if q0.abs() > 1e-12 * largest.max(1.0) {
            if let Some(d) = report.diagnostics.relative_drift(name) {
                drifts.insert(name.to_string(), json!(d));
            }
        } else {
            let d = col.iter().fold(0.0f64, |a, q| a.max((q - q0).abs()));
            absolute.insert(name.to_string(), json!(d));
        }
    }
    let summary = json!({
        "scenario": resolved.scenario.name(),
        "steps": report.steps,
        "t_final": report.time,
        "seed": resolved.seed,
        "drifts": drifts,
        "absolute_drifts": absolute,
        "metrics": report.metrics,
    });
    let summary_path = out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    let mut files = vec![diag_path];
    files.extend(report.files);
    files.push(summary_path);
    Ok(RunOutcome {
        summary,
        diagnostics: report.diagnostics,
        files,
    })
}

fn dump(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "value"])?;
    for (k, x) in values.iter().enumerate() {
        w.write_record([k.to_string(), crate::io::fmt(*x)])?;
    }
    w.flush()?;
    Ok(())
}
