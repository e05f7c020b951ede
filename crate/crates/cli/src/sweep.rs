//! Spiral refit over modes and fibre lengths.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softrigid::spiral::{anchor_trajectory, refit_oracle, SpiralFit, SpiralMode, SpiralModel};
use softrigid::GeometryParams;

use crate::error::{from_json, CliError};
use crate::run::{create, write_json};

/// How the other lengths follow `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Every length scales with `l`.
    #[default]
    Proportional,
    /// Only the segment length changes.
    FibreOnly,
}

fn all_modes() -> Vec<SpiralMode> {
    SpiralMode::ALL.to_vec()
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "all_modes")]
    pub modes: Vec<SpiralMode>,
    /// Segment lengths, m. Empty means the base geometry only.
    #[serde(default)]
    pub lengths: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub geometry: GeometryParams,
    /// Also write the fitted anchor points of every row.
    #[serde(default)]
    pub dump_points: bool,
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spec = Self::parse(path, &text)?;
        Ok((spec, text))
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| from_json(path, &e))?;
        let source = crate::scenario::Source { path, text };
        spec.geometry.validate().map_err(|e| source.error(&["geometry"], e.to_string()))?;
        if spec.modes.is_empty() {
            return Err(source.error(&["modes"], "modes must not be empty"));
        }
        if spec.n_samples < 50 {
            return Err(source.error(&["n_samples"], format!("n_samples must be at least 50, got {}", spec.n_samples)));
        }
        if let Some(l) = spec.lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(source.error(&["lengths"], format!("lengths must be positive, got {l}")));
        }
        Ok(spec)
    }

    /// Geometry of one sweep point.
    pub fn geometry_for(&self, l: f64) -> GeometryParams {
        match self.scaling {
            Scaling::Proportional => self.geometry.scaled(l / self.geometry.l),
            Scaling::FibreOnly => GeometryParams { l, ..self.geometry },
        }
    }

    fn lengths(&self) -> Vec<f64> {
        if self.lengths.is_empty() {
            vec![self.geometry.l]
        } else {
            self.lengths.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mode: SpiralMode,
    pub l: f64,
    pub fit: SpiralFit,
    /// Relative deviation of the fitted a/l and |b| from the table.
    pub dev_a: f64,
    pub dev_b: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSpread {
    pub mode: SpiralMode,
    /// (max - min) / mean of a/l over the lengths.
    pub a_spread: f64,
    pub b_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub spread: Vec<ModeSpread>,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (hi - lo) / mean.abs()
}

impl SweepReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4} {:>8} {:>9} {:>9} {:>8} {:>8} {:>9} {:>7}",
            "mode", "l", "a/l", "|b|", "dev_a", "dev_b", "rms/l", "time"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>4} {:>8.4} {:>9.4} {:>9.4} {:>7.2}% {:>7.2}% {:>9.2e} {:>6.2}s",
                r.mode.to_string(),
                r.l,
                r.fit.a_over_l,
                r.fit.b.abs(),
                100.0 * r.dev_a,
                100.0 * r.dev_b,
                r.fit.rms_over_l,
                r.runtime
            );
        }
        for m in &self.spread {
            let _ = writeln!(
                s,
                "mode {} spread across lengths: a/l {:.3}%, |b| {:.3}%",
                m.mode,
                100.0 * m.a_spread,
                100.0 * m.b_spread
            );
        }
        s
    }
}

/// Fits every (mode, length) pair and writes `sweep.csv` into `out`.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> Result<SweepReport, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let lengths = spec.lengths();
    let jobs: Vec<(SpiralMode, f64)> = spec
        .modes
        .iter()
        .flat_map(|&m| lengths.iter().map(move |&l| (m, l)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(mode, l)| {
            let geom = spec.geometry_for(l);
            let started = Instant::now();
            let fit = refit_oracle(mode, &geom, spec.n_samples)?;
            let runtime = started.elapsed().as_secs_f64();
            let (dev_a, dev_b) = fit.deviation(&SpiralModel::table(mode));
            Ok(SweepRow {
                mode,
                l,
                fit,
                dev_a,
                dev_b,
                runtime,
            })
        })
        .collect::<Result<Vec<_>, softrigid::Error>>()?;

    let spread = spec
        .modes
        .iter()
        .map(|&mode| {
            let of_mode = rows.iter().filter(|r| r.mode == mode);
            ModeSpread {
                mode,
                a_spread: spread(of_mode.clone().map(|r| r.fit.a_over_l)),
                b_spread: spread(of_mode.map(|r| r.fit.b.abs())),
            }
        })
        .collect();
    let report = SweepReport { rows, spread };

    let path = out.join("sweep.csv");
    let io = |e: std::io::Error| CliError::io(&path, e);
    let mut w = softrigid::export::csv_writer(create(&path)?).map_err(io)?;
    let csv_err = |e: csv::Error| CliError::io(&path, e.into());
    w.write_record([
        "mode", "l", "a_over_l", "b", "cx_over_l", "cy_over_l", "rms_over_l", "table_a_over_l", "table_b", "dev_a",
        "dev_b",
    ])
    .map_err(csv_err)?;
    for r in &report.rows {
        let t = SpiralModel::table(r.mode);
        let f = &r.fit;
        let mut rec = vec![r.mode.to_string()];
        rec.extend(
            [r.l, f.a_over_l, f.b, f.cx_over_l, f.cy_over_l, f.rms_over_l, t.a_over_l, -t.b_mag, r.dev_a, r.dev_b]
                .iter()
                .map(f64::to_string),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;

    if spec.dump_points {
        for (i, r) in report.rows.iter().enumerate() {
            let geom = spec.geometry_for(r.l);
            let path = out.join(format!("points_{}_{i:02}.csv", r.mode));
            let mut w = softrigid::export::csv_writer(create(&path)?).map_err(|e| CliError::io(&path, e))?;
            let csv_err = |e: csv::Error| CliError::io(&path, e.into());
            w.write_record(["kappa", "x", "y"]).map_err(csv_err)?;
            for (kappa, p) in anchor_trajectory(r.mode, &geom, spec.n_samples) {
                w.write_record([kappa, p.x, p.y].iter().map(f64::to_string)).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
    }
    write_json(&out.join("sweep_summary.json"), &report)?;
    Ok(report)
}
