//! CSV and JSON reports for trials and sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SweepRow, TrialResult};
use crate::{Error, Result};

/// Formats a value with six significant digits, fixed-point.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Per-step signal comparison rows for the time-varying cases: the estimate
/// is rescaled causally to the true signal's running range, since it is only
/// defined up to scale.
pub fn signal_rows(result: &TrialResult) -> Vec<(u64, f64, f64, f64, f64)> {
    let Some(trace) = &result.est_trace else {
        return Vec::new();
    };
    let dt = result.config.dt;
    let signal = &result.scenario.signal;
    let mut run_max_truth = 0.0_f64;
    let mut run_max_est = 0.0_f64;
    let mut rows = Vec::with_capacity(trace.estimate.len());
    for (k, &est) in trace.estimate.iter().enumerate() {
        let step = trace.start_step + k as u64;
        let t = step as f64 * dt;
        let truth = signal.eval(t);
        run_max_truth = run_max_truth.max(truth.abs());
        run_max_est = run_max_est.max(est.abs());
        let scale = run_max_truth / run_max_est.max(f64::MIN_POSITIVE);
        let pct = 100.0 * (est * scale - truth).abs() / run_max_truth.max(f64::MIN_POSITIVE);
        rows.push((step, t, truth, est, pct));
    }
    rows
}

/// Writes passes.csv, signal.csv (cases 3 and 4), scenario.json, and
/// result.json into `dir`.
pub fn emit_reports(result: &TrialResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;

    let mut passes = String::from("pass_index,expected_cost,incurred_cost,path,is_oracle_path\n");
    for rec in &result.passes {
        let path: Vec<String> = rec.path.iter().map(|v| v.to_string()).collect();
        writeln!(
            passes,
            "{},{},{},{},{}",
            rec.pass_index,
            fmt_sig(rec.expected_cost),
            fmt_sig(rec.incurred_cost),
            path.join("-"),
            rec.path == result.oracle_path
        )
        .expect("string write");
    }
    write_file(dir, "passes.csv", &passes)?;

    if result.est_trace.is_some() {
        let mut signal = String::from("step,t,true_dpx2,estimated_edpx2,percent_error\n");
        for (step, t, truth, est, pct) in signal_rows(result) {
            writeln!(
                signal,
                "{step},{},{},{},{}",
                fmt_sig(t),
                fmt_sig(truth),
                fmt_sig(est),
                fmt_sig(pct)
            )
            .expect("string write");
        }
        write_file(dir, "signal.csv", &signal)?;
    }

    let scenario = serde_json::to_string_pretty(&result.scenario)
        .map_err(|e| Error::Io(format!("scenario serialization: {e}")))?;
    write_file(dir, "scenario.json", &scenario)?;

    let full = serde_json::to_string(&result)
        .map_err(|e| Error::Io(format!("result serialization: {e}")))?;
    write_file(dir, "result.json", &full)?;
    Ok(())
}

/// Writes summary.csv for a sweep.
pub fn emit_summary(rows: &[SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut out =
        String::from("grid,case,estimator,median_passes,min_passes,max_passes,frac_converged\n");
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.grid,
            row.case,
            row.estimator,
            row.median_passes.map_or("none".to_string(), fmt_sig),
            row.min_passes.map_or("none".to_string(), |v| v.to_string()),
            row.max_passes.map_or("none".to_string(), |v| v.to_string()),
            fmt_sig(row.converged as f64 / row.trials.max(1) as f64),
        )
        .expect("string write");
    }
    write_file(dir, "summary.csv", &out)
}
