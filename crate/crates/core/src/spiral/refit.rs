use nalgebra::Vector2;
use serde::Serialize;

use super::{SpiralMode, SpiralModel};
use crate::error::{Error, Result};
use crate::geometry::{cc_transform_unchecked, GeometryParams, Segment};

/// Largest admissible RMS radial residual of a refit, normalised by `l`.
pub const REFIT_RESIDUAL_LIMIT: f64 = 0.05;

const GRID: usize = 9;
const GRID_SPAN: f64 = 0.8;

/// Result of fitting a logarithmic spiral to a sampled anchor trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpiralFit {
    pub mode: SpiralMode,
    /// Radius at the mode's reference angle, over `l`.
    pub a_over_l: f64,
    /// Signed growth rate for a positive bend.
    pub b: f64,
    pub cx_over_l: f64,
    pub cy_over_l: f64,
    /// RMS radial residual over `l`.
    pub rms_over_l: f64,
    pub samples: usize,
}

impl SpiralFit {
    /// Relative deviation of `a` and `|b|` from a reference model.
    pub fn deviation(&self, reference: &SpiralModel) -> (f64, f64) {
        (
            (self.a_over_l - reference.a_over_l).abs() / reference.a_over_l,
            (self.b.abs() - reference.b_mag).abs() / reference.b_mag,
        )
    }
}

/// Positions, in the frame of the stationary unit of segment 2, of the point
/// that traces the spiral as the bend grows from straight to the mode limit.
pub fn anchor_trajectory(mode: SpiralMode, geom: &GeometryParams, n: usize) -> Vec<(f64, Vector2<f64>)> {
    let model = SpiralModel::table(mode);
    let kmax = model.kappa_bound(geom.l);
    (0..n)
        .map(|i| {
            let kappa = (kmax * i as f64 / (n - 1) as f64).max(1e-9);
            let from_b2 = cc_transform_unchecked(kappa, Segment::Two, geom).inverse();
            let p = match mode {
                SpiralMode::Adjacent => from_b2.transform_point(&Vector2::new(geom.l0 / 2.0, 0.0)),
                SpiralMode::Opposite => {
                    (from_b2 * cc_transform_unchecked(0.0, Segment::One, geom)).origin()
                }
                SpiralMode::BothSoft => {
                    (from_b2 * cc_transform_unchecked(kappa, Segment::One, geom)).origin()
                }
            };
            (kappa, p)
        })
        .collect()
}

struct Regression {
    /// Intercept and slope of `ln r` against the unwrapped polar angle.
    intercept: f64,
    slope: f64,
    /// +1 when the polar angle grows along the trajectory.
    direction: f64,
    rss: f64,
}

fn regress(points: &[Vector2<f64>], c: &Vector2<f64>) -> Option<Regression> {
    let n = points.len() as f64;
    let mut radii = Vec::with_capacity(points.len());
    let mut angles = Vec::with_capacity(points.len());
    let mut prev = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d = p - c;
        let r = d.norm();
        if r <= f64::EPSILON || !r.is_finite() {
            return None;
        }
        let mut ang = d.y.atan2(d.x);
        if i > 0 {
            ang += std::f64::consts::TAU * ((prev - ang) / std::f64::consts::TAU).round();
        }
        prev = ang;
        radii.push(r);
        angles.push(ang);
    }
    let mean_t = angles.iter().sum::<f64>() / n;
    let mean_y = radii.iter().map(|r| r.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, r) in angles.iter().zip(&radii) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (r.ln() - mean_y);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let rss = angles
        .iter()
        .zip(&radii)
        .map(|(t, r)| (r - (intercept + slope * t).exp()).powi(2))
        .sum();
    Some(Regression {
        intercept,
        slope,
        direction: (angles[angles.len() - 1] - angles[0]).signum(),
        rss,
    })
}

fn nelder_mead<F: Fn(&Vector2<f64>) -> f64>(f: F, start: Vector2<f64>, step: f64) -> (Vector2<f64>, f64) {
    let mut simplex = [
        start,
        start + Vector2::new(step, 0.0),
        start + Vector2::new(0.0, step),
    ];
    let mut values = simplex.map(|p| f(&p));
    for _ in 0..2000 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let spread = (simplex[1] - simplex[0]).norm().max((simplex[2] - simplex[0]).norm());
        if spread < 1e-13 || (values[2] - values[0]).abs() <= 1e-16 * values[0].abs().max(1e-300) {
            break;
        }
        let centroid = (simplex[0] + simplex[1]) / 2.0;
        let reflect = centroid + (centroid - simplex[2]);
        let fr = f(&reflect);
        if fr < values[0] {
            let expand = centroid + 2.0 * (centroid - simplex[2]);
            let fe = f(&expand);
            if fe < fr {
                simplex[2] = expand;
                values[2] = fe;
            } else {
                simplex[2] = reflect;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflect;
            values[2] = fr;
        } else {
            let contract = if fr < values[2] {
                centroid + 0.5 * (reflect - centroid)
            } else {
                centroid + 0.5 * (simplex[2] - centroid)
            };
            let fc = f(&contract);
            if fc < values[2].min(fr) {
                simplex[2] = contract;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best], values[best])
}

/// Refits the spiral of `mode` from `n` exactly computed anchor positions.
///
/// The centre minimises the absolute radial residual of a log-linear
/// regression of radius on polar angle, searched from a grid of starts.
pub fn refit_oracle(mode: SpiralMode, geom: &GeometryParams, n: usize) -> Result<SpiralFit> {
    geom.validate()?;
    if n < 50 {
        return Err(Error::InvalidParameter(format!(
            "spiral refit needs at least 50 samples, got {n}"
        )));
    }
    let l = geom.l;
    let points: Vec<Vector2<f64>> = anchor_trajectory(mode, geom, n).into_iter().map(|(_, p)| p).collect();
    let cost = |c: &Vector2<f64>| regress(&points, c).map_or(f64::INFINITY, |r| r.rss);

    let mut best = (Vector2::zeros(), f64::INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            let g = |k: usize| (-GRID_SPAN + 2.0 * GRID_SPAN * k as f64 / (GRID - 1) as f64) * l;
            let start = Vector2::new(g(i), g(j));
            let candidate = nelder_mead(cost, start, 0.05 * l);
            if candidate.1 < best.1 {
                best = candidate;
            }
        }
    }
    let (centre, rss) = best;
    let reg = regress(&points, &centre).ok_or(Error::OracleFailure {
        mode,
        residual: f64::INFINITY,
        threshold: REFIT_RESIDUAL_LIMIT,
    })?;
    let rms_over_l = (rss / n as f64).sqrt() / l;
    if rms_over_l.is_nan() || rms_over_l > REFIT_RESIDUAL_LIMIT {
        return Err(Error::OracleFailure {
            mode,
            residual: rms_over_l,
            threshold: REFIT_RESIDUAL_LIMIT,
        });
    }
    // Mirror the angle so that it grows with the bend.
    let b = reg.direction * reg.slope;
    let theta_ref = SpiralModel::table(mode).theta_ref;
    let a = (reg.intercept + b * theta_ref).exp();
    Ok(SpiralFit {
        mode,
        a_over_l: a / l,
        b,
        cx_over_l: centre.x / l,
        cy_over_l: centre.y / l,
        rms_over_l,
        samples: n,
    })
}
