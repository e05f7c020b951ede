//! Logarithmic-spiral deformation modes.
//!
//! When a segment is soft, the moving locomotion unit follows (to a good
//! approximation) a logarithmic spiral `rho = a * exp(b * theta)` whose
//! constants depend on which units move and which segments are soft. The
//! spiral angle maps linearly onto segment curvature, which yields the rate
//! coefficients `K = m / (l * rho)` (curvature per unit speed) and
//! `Phi = m / rho` (body orientation per unit speed).
//!
//! Spiral angles are measured with the straight fibre at `theta = pi`; each
//! mode carries the reference angle at which its tabulated scale `a` is
//! read off.

mod refit;

use std::f64::consts::{FRAC_PI_3, PI, TAU};
use std::fmt;
use std::io::Write;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Segment;

pub use refit::{anchor_trajectory, refit_oracle, SpiralFit, REFIT_RESIDUAL_LIMIT};

/// The three soft-state motion modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpiralMode {
    /// One segment soft, the unit next to it drives; the body is stationary.
    Adjacent,
    /// One segment soft, the unit beyond the rigid segment drives.
    Opposite,
    /// Both segments soft, bending uniformly.
    BothSoft,
}

impl SpiralMode {
    pub const ALL: [SpiralMode; 3] = [SpiralMode::Adjacent, SpiralMode::Opposite, SpiralMode::BothSoft];

    pub fn number(self) -> u8 {
        match self {
            SpiralMode::Adjacent => 1,
            SpiralMode::Opposite => 2,
            SpiralMode::BothSoft => 3,
        }
    }

    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(SpiralMode::Adjacent),
            2 => Some(SpiralMode::Opposite),
            3 => Some(SpiralMode::BothSoft),
            _ => None,
        }
    }
}

impl fmt::Display for SpiralMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let roman = ["I", "II", "III"];
        write!(f, "{}", roman[self.number() as usize - 1])
    }
}

impl std::str::FromStr for SpiralMode {
    type Err = Error;

    /// Accepts the roman numeral or the arabic mode number.
    fn from_str(s: &str) -> Result<Self> {
        let k = match s {
            "I" | "1" => 1,
            "II" | "2" => 2,
            "III" | "3" => 3,
            _ => 0,
        };
        Self::from_number(k)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown spiral mode {s:?}, expected I, II or III")))
    }
}

impl TryFrom<String> for SpiralMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpiralMode> for String {
    fn from(m: SpiralMode) -> String {
        m.to_string()
    }
}

/// Constants of one spiral mode, lengths normalised by the segment length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralModel {
    pub mode: SpiralMode,
    pub a_over_l: f64,
    /// Magnitude of the growth rate; the sign follows the bend direction.
    pub b_mag: f64,
    pub cx_over_l: f64,
    pub cy_over_l: f64,
    /// Ratio between bending angle and spiral angle, `alpha = m (theta - pi)`.
    pub m: f64,
    /// Spiral angle at which `a` is the radius.
    pub theta_ref: f64,
}

/// Rate coefficients of one mode at one curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoeffs {
    /// Curvature rate per unit speed, 1/m^2.
    pub k: f64,
    /// Orientation rate per unit speed, 1/m.
    pub phi: f64,
    /// Spiral radius, m.
    pub rho: f64,
}

impl SpiralModel {
    /// Tabulated constants.
    pub const fn table(mode: SpiralMode) -> Self {
        match mode {
            SpiralMode::Adjacent => Self {
                mode,
                a_over_l: 2.325,
                b_mag: 0.3165,
                cx_over_l: -0.1223,
                cy_over_l: 0.1782,
                m: 1.5,
                theta_ref: 0.0,
            },
            SpiralMode::Opposite => Self {
                mode,
                a_over_l: 3.3041,
                b_mag: 0.083,
                cx_over_l: 0.1988,
                cy_over_l: 0.1640,
                m: 1.0,
                theta_ref: 0.0,
            },
            SpiralMode::BothSoft => Self {
                mode,
                a_over_l: 2.4471,
                b_mag: 0.2229,
                cx_over_l: -0.2722,
                cy_over_l: 0.3949,
                m: 0.75,
                theta_ref: PI,
            },
        }
    }

    /// Admissible spiral angles.
    pub fn theta_range(&self) -> (f64, f64) {
        match self.mode {
            SpiralMode::Opposite => (-PI, 3.0 * PI),
            _ => (-FRAC_PI_3, 7.0 * FRAC_PI_3),
        }
    }

    /// Largest curvature magnitude the mode covers: a full circle, or a
    /// half circle when both segments bend together.
    pub fn kappa_bound(&self, l: f64) -> f64 {
        match self.mode {
            SpiralMode::BothSoft => PI / l,
            _ => TAU / l,
        }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        let (lo, hi) = self.theta_range();
        let tol = 1e-12 * hi.abs();
        if !theta.is_finite() || theta < lo - tol || theta > hi + tol {
            return Err(Error::SpiralAngleOutOfRange {
                mode: self.mode,
                theta,
            });
        }
        Ok(())
    }

    fn check_kappa(&self, kappa: f64, l: f64, segment: Segment) -> Result<()> {
        crate::geometry::check_curvature(kappa, segment, self.kappa_bound(l))
    }

    pub fn kappa_from_theta(&self, theta: f64, l: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.m * (theta - PI) / l)
    }

    pub fn theta_from_kappa(&self, kappa: f64, l: f64) -> Result<f64> {
        // The segment is irrelevant for the bound; report segment 1.
        self.check_kappa(kappa, l, Segment::One)?;
        Ok(kappa * l / self.m + PI)
    }

    /// Point of the spiral at angle `theta` in the spiral-centre frame.
    /// The growth rate is negative for a positive bend.
    pub fn spiral_point(&self, theta: f64, l: f64, bend_sign: f64) -> Result<Vector2<f64>> {
        self.check_theta(theta)?;
        let b = -bend_sign.signum() * self.b_mag;
        let rho = self.a_over_l * l * (b * (theta - self.theta_ref)).exp();
        Ok(Vector2::new(rho * theta.cos(), rho * theta.sin()))
    }

    /// Spiral radius seen by a unit when the driven segment has curvature
    /// `kappa`. Negative bends trace the mirror image of the positive spiral,
    /// so the radius depends on `|kappa|` only.
    pub fn radius(&self, kappa: f64, l: f64) -> f64 {
        let theta = PI + (kappa * l).abs() / self.m;
        self.a_over_l * l * (-self.b_mag * (theta - self.theta_ref)).exp()
    }

    pub fn rate_coeffs(&self, kappa: f64, l: f64, segment: Segment) -> Result<RateCoeffs> {
        self.check_kappa(kappa, l, segment)?;
        let rho = self.radius(kappa, l);
        Ok(RateCoeffs {
            k: self.m / (l * rho),
            phi: self.m / rho,
            rho,
        })
    }

    /// Spiral centre in the locomotion-unit end frame of `segment`, mirrored
    /// for negative bends. Segment 1 is the mirror image of segment 2 about
    /// the body y-axis.
    pub fn center_in_segment_frame(&self, l: f64, segment: Segment, bend_sign: f64) -> Vector2<f64> {
        let sy = if bend_sign < 0.0 { -1.0 } else { 1.0 };
        Vector2::new(
            segment.side() * self.cx_over_l * l,
            sy * self.cy_over_l * l,
        )
    }

    /// Modelled unit position relative to the spiral centre for curvature
    /// `kappa`, in the same orientation as [`anchor_trajectory`] (the frame
    /// is mirrored so that the spiral angle grows with `|kappa|`).
    pub fn curve_point(&self, kappa: f64, l: f64) -> Vector2<f64> {
        let theta = PI + (kappa * l).abs() / self.m;
        let rho = self.radius(kappa, l);
        let sy = if kappa < 0.0 { 1.0 } else { -1.0 };
        Vector2::new(rho * theta.cos(), sy * rho * theta.sin())
    }
}

/// Spiral constants for all three modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralTable {
    pub models: [SpiralModel; 3],
}

impl Default for SpiralTable {
    fn default() -> Self {
        Self {
            models: SpiralMode::ALL.map(SpiralModel::table),
        }
    }
}

impl SpiralTable {
    pub fn get(&self, mode: SpiralMode) -> &SpiralModel {
        &self.models[mode.number() as usize - 1]
    }
}

/// Writes a CSV of modelled spiral points (`mode,theta,x,y,kappa`) swept
/// over each mode's curvature range.
pub fn write_spiral_points<W: Write>(
    out: W,
    table: &SpiralTable,
    l: f64,
    samples_per_mode: usize,
) -> std::io::Result<()> {
    let mut w = crate::export::csv_writer(out)?;
    w.write_record(["mode", "theta", "x", "y", "kappa"])?;
    let n = samples_per_mode.max(2);
    for model in &table.models {
        let bound = model.kappa_bound(l);
        for i in 0..n {
            let kappa = -bound + 2.0 * bound * i as f64 / (n - 1) as f64;
            let theta = kappa * l / model.m + PI;
            let p = model.curve_point(kappa, l);
            w.write_record(&[
                model.mode.number().to_string(),
                theta.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                kappa.to_string(),
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const L: f64 = 0.04;

    #[test]
    fn table_constants() {
        let m: Vec<f64> = SpiralMode::ALL.iter().map(|k| SpiralModel::table(*k).m).collect();
        assert_eq!(m, vec![1.5, 1.0, 0.75]);
        let ii = SpiralModel::table(SpiralMode::Opposite);
        assert_eq!((ii.a_over_l, ii.b_mag, ii.cx_over_l, ii.cy_over_l), (3.3041, 0.083, 0.1988, 0.164));
    }

    #[test]
    fn spiral_point_at_zero_angle_is_scale() {
        for mode in [SpiralMode::Adjacent, SpiralMode::Opposite] {
            let s = SpiralModel::table(mode);
            let p = s.spiral_point(0.0, L, 1.0).unwrap();
            assert_abs_diff_eq!(p.x, s.a_over_l * L, epsilon = 1e-15);
            assert_abs_diff_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn mode_one_radius_at_half_turn() {
        let s = SpiralModel::table(SpiralMode::Adjacent);
        let p = s.spiral_point(PI, L, 1.0).unwrap();
        // 2.325 * 0.04 * exp(-0.3165 pi)
        assert_abs_diff_eq!(p.norm(), 0.034408, epsilon = 1e-6);
    }

    #[test]
    fn spiral_self_similarity() {
        let s = SpiralModel::table(SpiralMode::Opposite);
        for bend in [1.0, -1.0] {
            let b = -bend * s.b_mag;
            let r0 = s.spiral_point(0.3, L, bend).unwrap().norm();
            let r1 = s.spiral_point(0.3 + TAU, L, bend).unwrap().norm();
            assert_abs_diff_eq!(r1 / r0, (TAU * b).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn spiral_angle_out_of_range() {
        let s = SpiralModel::table(SpiralMode::Adjacent);
        assert!(matches!(
            s.spiral_point(-2.0, L, 1.0),
            Err(Error::SpiralAngleOutOfRange { .. })
        ));
        assert!(s.kappa_from_theta(8.0, L).is_err());
        assert!(s.theta_from_kappa(2.0 * TAU / L, L).is_err());
    }

    #[test]
    fn curvature_maps() {
        for mode in SpiralMode::ALL {
            let s = SpiralModel::table(mode);
            assert_eq!(s.kappa_from_theta(PI, L).unwrap(), 0.0);
        }
        let i = SpiralModel::table(SpiralMode::Adjacent);
        assert_abs_diff_eq!(i.kappa_from_theta(7.0 * FRAC_PI_3, L).unwrap(), TAU / L, epsilon = 1e-9);
        assert_abs_diff_eq!(i.kappa_from_theta(-FRAC_PI_3, L).unwrap(), -TAU / L, epsilon = 1e-9);
        let ii = SpiralModel::table(SpiralMode::Opposite);
        assert_abs_diff_eq!(ii.kappa_from_theta(3.0 * PI, L).unwrap(), TAU / L, epsilon = 1e-9);
        let iii = SpiralModel::table(SpiralMode::BothSoft);
        assert_abs_diff_eq!(iii.kappa_from_theta(7.0 * FRAC_PI_3, L).unwrap(), PI / L, epsilon = 1e-9);
    }

    #[test]
    fn opposite_mode_rate_at_straight_fibre() {
        let s = SpiralModel::table(SpiralMode::Opposite);
        let rc = s.rate_coeffs(0.0, L, Segment::Two).unwrap();
        // rho = 3.3041 * 0.04 * exp(-0.083 pi), K = 1 / (l rho)
        let rho = 3.3041 * 0.04 * (-0.083 * PI).exp();
        assert_abs_diff_eq!(rc.rho, rho, epsilon = 1e-15);
        assert_abs_diff_eq!(rc.rho, 0.10183, epsilon = 1e-5);
        assert_abs_diff_eq!(rc.k, 245.5, epsilon = 0.05);
    }

    #[test]
    fn radius_shrinks_with_bending() {
        for mode in SpiralMode::ALL {
            let s = SpiralModel::table(mode);
            let bound = s.kappa_bound(L);
            let mut last = f64::INFINITY;
            for i in 0..=100 {
                let kappa = bound * i as f64 / 100.0;
                let rho = s.radius(kappa, L);
                assert!(rho < last);
                assert_eq!(rho, s.radius(-kappa, L));
                last = rho;
            }
        }
    }

    #[test]
    fn rate_coeffs_out_of_mode_bound() {
        let s = SpiralModel::table(SpiralMode::BothSoft);
        assert!(s.rate_coeffs(1.01 * PI / L, L, Segment::One).is_err());
        assert!(s.rate_coeffs(0.99 * PI / L, L, Segment::One).is_ok());
    }

    #[test]
    fn spiral_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_spiral_points(&mut buf, &SpiralTable::default(), L, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1], "mode,theta,x,y,kappa");
        assert_eq!(lines.len(), 2 + 15);
    }
}
