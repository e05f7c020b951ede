//! Domain types, physical constants and the constant-curvature frame
//! transforms of the two-segment fibre.
//!
//! Frames: `{b0}` sits at the middle of the central link with its x-axis
//! along the link. Segment 1 leaves the link towards -x, segment 2 towards
//! +x. `{b1}` and `{b2}` are attached to the far (locomotion-unit) ends of
//! the segments and coincide in orientation with `{b0}` when the fibre is
//! straight. A positive curvature bends the segment end towards +y of
//! `{b0}` on both sides.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector2, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this bending angle the arc transform switches to its Taylor series.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Fixed mounting angles of the four wheels relative to their segment-end
/// frame.
pub const WHEEL_MOUNT_ANGLES: [f64; 4] = [FRAC_PI_2, 0.0, -FRAC_PI_2, PI];

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Generalised configuration of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub x: f64,
    pub y: f64,
    /// Orientation of `{b0}`, stored unwrapped.
    pub phi: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl AgentConfig {
    pub const fn new(x: f64, y: f64, phi: f64, kappa1: f64, kappa2: f64) -> Self {
        Self {
            x,
            y,
            phi,
            kappa1,
            kappa2,
        }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.x, self.y, self.phi, self.kappa1, self.kappa2)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn kappa(&self, segment: Segment) -> f64 {
        match segment {
            Segment::One => self.kappa1,
            Segment::Two => self.kappa2,
        }
    }

    pub fn set_kappa(&mut self, segment: Segment, kappa: f64) {
        match segment {
            Segment::One => self.kappa1 = kappa,
            Segment::Two => self.kappa2 = kappa,
        }
    }

    /// `target - self` with the orientation component wrapped to the
    /// shortest angle.
    pub fn error_to(&self, target: &AgentConfig) -> Vector5<f64> {
        let mut e = target.to_vector() - self.to_vector();
        e[2] = wrap_angle(e[2]);
        e
    }

    /// Pose of `{b0}` in the global frame.
    pub fn body_pose(&self) -> Pose2 {
        Pose2::new(self.phi, self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Index of a variable-stiffness segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    One,
    Two,
}

impl Segment {
    pub const BOTH: [Segment; 2] = [Segment::One, Segment::Two];

    pub fn index(self) -> usize {
        match self {
            Segment::One => 0,
            Segment::Two => 1,
        }
    }

    pub fn other(self) -> Segment {
        match self {
            Segment::One => Segment::Two,
            Segment::Two => Segment::One,
        }
    }

    /// `-1` for segment 1 and `+1` for segment 2, the upper/lower choice of
    /// every `±` in the arc transform.
    pub fn side(self) -> f64 {
        match self {
            Segment::One => -1.0,
            Segment::Two => 1.0,
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::One => write!(f, "segment 1"),
            Segment::Two => write!(f, "segment 2"),
        }
    }
}

/// Soft (`true`) or rigid (`false`) state of both segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StiffnessState {
    pub s1: bool,
    pub s2: bool,
}

impl StiffnessState {
    pub const RIGID: Self = Self::new(false, false);
    pub const SEG2_SOFT: Self = Self::new(false, true);
    pub const SEG1_SOFT: Self = Self::new(true, false);
    pub const BOTH_SOFT: Self = Self::new(true, true);
    /// The four motion modes in planner order; the index doubles as the
    /// tie-break priority.
    pub const ALL: [Self; 4] = [Self::RIGID, Self::SEG2_SOFT, Self::SEG1_SOFT, Self::BOTH_SOFT];

    pub const fn new(s1: bool, s2: bool) -> Self {
        Self { s1, s2 }
    }

    /// Any segment soft.
    pub fn any_soft(&self) -> bool {
        self.s1 || self.s2
    }

    pub fn is_rigid(&self) -> bool {
        !self.any_soft()
    }

    pub fn is_soft(&self, segment: Segment) -> bool {
        match segment {
            Segment::One => self.s1,
            Segment::Two => self.s2,
        }
    }

    pub fn index(&self) -> usize {
        (self.s1 as usize) * 2 + self.s2 as usize
    }
}

impl fmt::Display for StiffnessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.s1 as u8, self.s2 as u8)
    }
}

impl std::str::FromStr for StiffnessState {
    type Err = Error;

    /// Two binary digits, segment 1 first: `"01"` is segment 2 soft.
    fn from_str(s: &str) -> Result<Self> {
        let bit = |c: u8| match c {
            b'0' => Some(false),
            b'1' => Some(true),
            _ => None,
        };
        match s.as_bytes() {
            [a, b] => bit(*a).zip(bit(*b)).map(|(s1, s2)| Self::new(s1, s2)),
            _ => None,
        }
        .ok_or_else(|| Error::InvalidParameter(format!("stiffness state must be 00, 01, 10 or 11, got {s:?}")))
    }
}

impl TryFrom<String> for StiffnessState {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StiffnessState> for String {
    fn from(s: StiffnessState) -> String {
        s.to_string()
    }
}

/// Geometric constants of the agent. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    /// Wheel radius.
    pub rho_w: f64,
    /// Side of the locomotion-unit block.
    pub a: f64,
    /// Wheel thickness.
    pub d: f64,
    /// Length of the plastic links at the fibre ends.
    pub l1: f64,
    /// Length of the middle link.
    pub l0: f64,
    /// Arc length of one variable-stiffness segment.
    pub l: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            rho_w: 0.01,
            a: 0.046,
            d: 0.01,
            l1: 0.03,
            l0: 0.03,
            l: 0.04,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho_w", self.rho_w),
            ("a", self.a),
            ("d", self.d),
            ("l1", self.l1),
            ("l0", self.l0),
            ("l", self.l),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "geometry.{name} must be a positive length, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn h1(&self) -> f64 {
        (2.0 * self.l1 + 2.0 * self.a + self.d) / 2.0
    }

    pub fn h2(&self) -> f64 {
        (2.0 * self.l1 + self.a) / 2.0
    }

    pub fn h3(&self) -> f64 {
        (self.a + self.d) / 2.0
    }

    /// Largest admissible curvature magnitude: one full circle per segment.
    pub fn kappa_max(&self) -> f64 {
        TAU / self.l
    }

    /// Every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rho_w: self.rho_w * factor,
            a: self.a * factor,
            d: self.d * factor,
            l1: self.l1 * factor,
            l0: self.l0 * factor,
            l: self.l * factor,
        }
    }

    /// Wheel positions in their segment-end frame, one column per wheel.
    pub fn wheel_offsets(&self) -> [Vector2<f64>; 4] {
        let (h1, h2, h3) = (self.h1(), self.h2(), self.h3());
        [
            Vector2::new(-h1, 0.0),
            Vector2::new(-h2, h3),
            Vector2::new(h1, 0.0),
            Vector2::new(h2, -h3),
        ]
    }

    /// Segment carrying wheel `i` (0-based).
    pub fn wheel_segment(i: usize) -> Segment {
        if i < 2 {
            Segment::One
        } else {
            Segment::Two
        }
    }
}

/// Planar homogeneous transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2(Matrix3<f64>);

impl Pose2 {
    pub fn new(angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, tx, s, c, ty, 0.0, 0.0, 1.0))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new(0.0, tx, ty)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn angle(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    pub fn origin(&self) -> Vector2<f64> {
        Vector2::new(self.0[(0, 2)], self.0[(1, 2)])
    }

    pub fn transform_point(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let h = self.0 * Vector3::new(p.x, p.y, 1.0);
        Vector2::new(h.x, h.y)
    }

    pub fn rotate_vector(&self, v: &Vector2<f64>) -> Vector2<f64> {
        self.0.fixed_view::<2, 2>(0, 0) * v
    }

    /// Closed-form rigid inverse.
    pub fn inverse(&self) -> Self {
        let r = self.0.fixed_view::<2, 2>(0, 0).transpose();
        let t = -(r * self.origin());
        Self(Matrix3::new(
            r[(0, 0)],
            r[(0, 1)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            t.y,
            0.0,
            0.0,
            1.0,
        ))
    }

    /// Reflection about the x-axis of the parent frame, `M T M` with
    /// `M = diag(1, -1, 1)`.
    pub fn mirrored(&self) -> Self {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        Self(m * self.0 * m)
    }
}

impl Mul for Pose2 {
    type Output = Pose2;

    fn mul(self, rhs: Pose2) -> Pose2 {
        Pose2(self.0 * rhs.0)
    }
}

/// `sin(a)/kappa` and `(1 - cos(a))/kappa` for `a = kappa * l`, with the
/// Taylor branch near zero.
fn arc_chord(kappa: f64, l: f64) -> (f64, f64) {
    let alpha = kappa * l;
    if alpha.abs() < SMALL_ANGLE {
        let a2 = alpha * alpha;
        (l * (1.0 - a2 / 6.0), l * alpha / 2.0)
    } else {
        (alpha.sin() / kappa, 2.0 * (alpha / 2.0).sin().powi(2) / kappa)
    }
}

/// Transform from `{b0}` to the end frame of `segment`, without the range
/// check. Used where finite differences step just past the bound.
pub(crate) fn cc_transform_unchecked(kappa: f64, segment: Segment, geom: &GeometryParams) -> Pose2 {
    let side = segment.side();
    let alpha = kappa * geom.l;
    let (along, across) = arc_chord(kappa, geom.l);
    Pose2::new(side * alpha, side * (geom.l0 / 2.0 + along), across)
}

/// Transform from the body frame `{b0}` to the end frame `{b_j}` of a
/// constant-curvature segment.
pub fn cc_transform(kappa: f64, segment: Segment, geom: &GeometryParams) -> Result<Pose2> {
    check_curvature(kappa, segment, geom.kappa_max())?;
    Ok(cc_transform_unchecked(kappa, segment, geom))
}

pub(crate) fn check_curvature(kappa: f64, segment: Segment, limit: f64) -> Result<()> {
    if !kappa.is_finite() || kappa.abs() > limit * (1.0 + 1e-12) {
        return Err(Error::CurvatureOutOfRange {
            segment,
            kappa,
            limit,
        });
    }
    Ok(())
}

/// Wheel pose relative to `{b0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelPose {
    pub x: f64,
    pub y: f64,
    /// Wheel-frame orientation relative to `{b0}`.
    pub psi: f64,
}

/// Positions and orientations of the four wheels in `{b0}`.
pub fn wheel_positions_body(q: &AgentConfig, geom: &GeometryParams) -> Result<[WheelPose; 4]> {
    let frames = [
        cc_transform(q.kappa1, Segment::One, geom)?,
        cc_transform(q.kappa2, Segment::Two, geom)?,
    ];
    let offsets = geom.wheel_offsets();
    Ok(std::array::from_fn(|i| {
        let segment = GeometryParams::wheel_segment(i);
        let frame = &frames[segment.index()];
        let p = frame.transform_point(&offsets[i]);
        let alpha = q.kappa(segment) * geom.l;
        WheelPose {
            x: p.x,
            y: p.y,
            psi: segment.side() * alpha + WHEEL_MOUNT_ANGLES[i],
        }
    }))
}

/// Wheel poses in the global frame.
pub fn wheel_positions_global(q: &AgentConfig, geom: &GeometryParams) -> Result<[WheelPose; 4]> {
    let body = q.body_pose();
    let local = wheel_positions_body(q, geom)?;
    Ok(local.map(|w| {
        let p = body.transform_point(&Vector2::new(w.x, w.y));
        WheelPose {
            x: p.x,
            y: p.y,
            psi: w.psi + q.phi,
        }
    }))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn curvature() -> impl Strategy<Value = f64> {
        let k = GeometryParams::default().kappa_max();
        -k..k
    }

    proptest! {
        #[test]
        fn mirror_symmetry(kappa in curvature(), two in any::<bool>()) {
            let g = GeometryParams::default();
            let segment = if two { Segment::Two } else { Segment::One };
            let pos = cc_transform(kappa, segment, &g).unwrap();
            let neg = cc_transform(-kappa, segment, &g).unwrap();
            prop_assert!((neg.matrix() - pos.mirrored().matrix()).abs().max() < 1e-14);
        }

        #[test]
        fn inverse_composes_to_identity(kappa in curvature(), two in any::<bool>()) {
            let g = GeometryParams::default();
            let segment = if two { Segment::Two } else { Segment::One };
            let t = cc_transform(kappa, segment, &g).unwrap();
            let id = t * t.inverse();
            prop_assert!((id.matrix() - Matrix3::identity()).abs().max() < 1e-12);
            let r = t.matrix().fixed_view::<2, 2>(0, 0).into_owned();
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn wheel_pairs_keep_their_spacing(k1 in curvature(), k2 in curvature(), phi in -3.0..3.0f64) {
            let g = GeometryParams::default();
            let straight = wheel_positions_body(&AgentConfig::default(), &g).unwrap();
            let bent = wheel_positions_global(&AgentConfig::new(0.1, -0.2, phi, k1, k2), &g).unwrap();
            let dist = |w: &[WheelPose; 4], i: usize, j: usize| (w[i].x - w[j].x).hypot(w[i].y - w[j].y);
            prop_assert!((dist(&straight, 0, 1) - dist(&bent, 0, 1)).abs() < 1e-12);
            prop_assert!((dist(&straight, 2, 3) - dist(&bent, 2, 3)).abs() < 1e-12);
        }
    }
}
