//! Many seeded runs of one scenario, each with its own start and target.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{exit, CliError};
use crate::run::{execute, write_json, RunStatus, Summary};
use crate::scenario::{draw_pair, RunConfig};

/// One line of the batch table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub steps: usize,
    pub mode_runs: usize,
    pub mode_switch_count: usize,
    pub last_mode_rigid: bool,
    pub final_distance: f64,
    pub pauses: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub runs: usize,
    pub base_seed: u64,
    pub converged: usize,
    pub thermal_timeouts: usize,
    /// Among converged runs: number of distinct mode runs -> count.
    pub mode_run_histogram: BTreeMap<usize, usize>,
    pub last_mode_rigid: usize,
    pub last_mode_rigid_fraction: f64,
    pub at_most_four_runs_fraction: f64,
    pub rows: Vec<BatchRow>,
}

impl BatchReport {
    pub fn exit_code(&self) -> u8 {
        if self.thermal_timeouts > 0 {
            exit::THERMAL_TIMEOUT
        } else if self.converged < self.runs {
            exit::NOT_CONVERGED
        } else {
            exit::SUCCESS
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let pct = |k: usize, n: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        let _ = writeln!(s, "runs: {}  base seed: {}", self.runs, self.base_seed);
        let _ = writeln!(
            s,
            "converged: {} ({:.1}%)  thermal timeouts: {}",
            self.converged,
            pct(self.converged, self.runs),
            self.thermal_timeouts
        );
        let _ = writeln!(
            s,
            "last mode rigid: {} of {} converged ({:.1}%)",
            self.last_mode_rigid,
            self.converged,
            100.0 * self.last_mode_rigid_fraction
        );
        let _ = writeln!(s, "mode runs per converged run:");
        for (k, n) in &self.mode_run_histogram {
            let _ = writeln!(s, "  {k:>3}: {n:>4} {}", "#".repeat(*n));
        }
        s
    }
}

fn row(index: usize, summary: &Summary) -> BatchRow {
    BatchRow {
        index,
        seed: summary.seed,
        status: summary.status,
        steps: summary.steps,
        mode_runs: summary.mode_runs.len(),
        mode_switch_count: summary.mode_switch_count,
        last_mode_rigid: summary.last_mode_rigid,
        final_distance: summary.final_distance,
        pauses: summary.pauses.len(),
        duration: summary.duration,
    }
}

/// Aggregates per-run rows into the study statistics.
pub fn aggregate(base_seed: u64, rows: Vec<BatchRow>) -> BatchReport {
    let converged: Vec<&BatchRow> = rows.iter().filter(|r| r.status == RunStatus::Converged).collect();
    let mut histogram = BTreeMap::new();
    for r in &converged {
        *histogram.entry(r.mode_runs).or_insert(0) += 1;
    }
    let frac = |k: usize| if converged.is_empty() { 0.0 } else { k as f64 / converged.len() as f64 };
    let last_rigid = converged.iter().filter(|r| r.last_mode_rigid).count();
    let short = converged.iter().filter(|r| r.mode_runs <= 4).count();
    BatchReport {
        runs: rows.len(),
        base_seed,
        converged: converged.len(),
        thermal_timeouts: rows.iter().filter(|r| r.status == RunStatus::ThermalTimeout).count(),
        mode_run_histogram: histogram,
        last_mode_rigid: last_rigid,
        last_mode_rigid_fraction: frac(last_rigid),
        at_most_four_runs_fraction: frac(short),
        rows,
    }
}

/// Runs `n` scenarios in parallel. Run `i` uses seed `seed + i` to draw its
/// start and target and writes into `out/run_<i>`.
pub fn run_batch(base: &RunConfig, n: usize, seed: u64, out: &Path) -> Result<BatchReport, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let run_seed = seed.wrapping_add(i as u64);
            let (q0, qt) = draw_pair(run_seed, &base.geometry);
            let cfg = RunConfig {
                q0,
                qt,
                seed: run_seed,
                ..base.clone()
            };
            let outcome = execute(&cfg, &out.join(format!("run_{i:03}")))?;
            Ok(row(i, &outcome.summary))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = aggregate(seed, rows);

    let path = out.join("batch.csv");
    let mut text = String::new();
    let _ = writeln!(text, "{}", softrigid::export::VERSION_LINE);
    let _ = writeln!(
        text,
        "index,seed,status,steps,mode_runs,mode_switch_count,last_mode_rigid,final_distance,pauses,duration"
    );
    for r in &report.rows {
        let status = serde_json::to_value(r.status).expect("status serialises");
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.seed,
            status.as_str().unwrap_or_default(),
            r.steps,
            r.mode_runs,
            r.mode_switch_count,
            u8::from(r.last_mode_rigid),
            r.final_distance,
            r.pauses,
            r.duration
        );
    }
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    write_json(&out.join("batch_summary.json"), &report)?;
    Ok(report)
}
