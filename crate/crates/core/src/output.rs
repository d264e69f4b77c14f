//! CSV writers for batch results, sweeps and per-replication traces.
//!
//! Every file is UTF-8 with LF line endings. Decimals carry 17 significant
//! digits in positional notation, enough to round-trip any `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::write_resolved_config;
use crate::error::{Result, SimError};
use crate::harness::{BatchResult, ReplicationTrace, SweepRun};

pub const AGENTS_EVOLUTION_FILE: &str = "agents_evolution.csv";
pub const RECOMMENDER_Q_FILE: &str = "recommender_q.csv";
pub const AGENTS_EVOLUTION_HEADER: &str = "iteration,non_addicted,addicted,fraction_non_addicted";
pub const RECOMMENDER_Q_HEADER: &str = "iteration,arm,mean_q";
pub const TRACE_HEADER: &str =
    "t,state,arm,action,next_state,user_reward,recommender_reward,addicted";

/// Positional decimal with exactly 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 {
        return "0.0000000000000000".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent marker") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| SimError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

pub fn agents_evolution_csv(result: &BatchResult) -> String {
    let n = result.n_replications;
    let mut out = String::with_capacity(32 * (result.horizon() + 1));
    out.push_str(AGENTS_EVOLUTION_HEADER);
    out.push('\n');
    for (t, &ok) in result.non_addicted.iter().enumerate() {
        let frac = ok as f64 / n as f64;
        let _ = writeln!(out, "{t},{ok},{},{}", n - ok, format_sig17(frac));
    }
    out
}

pub fn recommender_q_csv(result: &BatchResult) -> String {
    let mut out = String::with_capacity(32 * (result.horizon() * result.n_arms() + 1));
    out.push_str(RECOMMENDER_Q_HEADER);
    out.push('\n');
    for (t, row) in result.mean_q_arms.iter().enumerate() {
        for (arm, &q) in row.iter().enumerate() {
            let _ = writeln!(out, "{t},{arm},{}", format_sig17(q));
        }
    }
    out
}

/// Writes the batch CSVs into `out_dir` and returns their paths. The
/// recommender file is only produced when the environment has arms.
pub fn write_csv(result: &BatchResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    ensure_dir(out_dir)?;
    let mut written = Vec::with_capacity(2);
    let path = out_dir.join(AGENTS_EVOLUTION_FILE);
    write_file(&path, &agents_evolution_csv(result))?;
    written.push(path);
    if result.n_arms() > 0 {
        let path = out_dir.join(RECOMMENDER_Q_FILE);
        write_file(&path, &recommender_q_csv(result))?;
        written.push(path);
    }
    Ok(written)
}

/// CSVs plus `resolved_config.json`, making the directory self-describing.
pub fn write_batch(result: &BatchResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let mut written = write_csv(result, out_dir)?;
    written.push(write_resolved_config(&result.config, out_dir)?);
    Ok(written)
}

/// One subdirectory per parameter combination, named by its sweep label.
pub fn write_sweep(runs: &[SweepRun], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let mut dirs = Vec::with_capacity(runs.len());
    for run in runs {
        let dir = out_dir.join(run.label());
        write_batch(&run.result, &dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

pub fn trace_csv(trace: &ReplicationTrace) -> String {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let arm = r.arm.map(|a| a.to_string()).unwrap_or_default();
        let rec = r.recommender_reward.map(format_sig17).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.state.0,
            arm,
            r.action.0,
            r.next_state.0,
            format_sig17(r.user_reward),
            rec,
            u8::from(r.addicted)
        );
    }
    out
}

/// Writes `traces/replication_NNNN.csv` under `out_dir`, one per trace in
/// replication-index order.
pub fn write_traces(traces: &[ReplicationTrace], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref().join("traces");
    ensure_dir(&dir)?;
    traces
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let path = dir.join(format!("replication_{i:04}.csv"));
            write_file(&path, &trace_csv(tr))?;
            Ok(path)
        })
        .collect()
}
