//! Hybrid Jacobian mapping the input velocity to the configuration rate.
//!
//! Columns 1-2 carry the soft inputs `(v1, v2)`, columns 3-5 the rigid
//! body twist `(u0, v0, r0)`. While a segment is soft, one locomotion unit
//! holds still and the body is carried along by the bending segment; the
//! body origin is then tracked through the spiral centre of the active mode.

use nalgebra::{Matrix5, SMatrix, Vector2, Vector5};

use crate::error::{Error, Result};
use crate::geometry::{cc_transform_unchecked, AgentConfig, GeometryParams, Pose2, Segment, StiffnessState};
use crate::spiral::{SpiralMode, SpiralTable};

/// Relative step of the curvature finite difference, as a fraction of the
/// full-circle curvature.
const FD_STEP: f64 = 1e-6;

/// Tolerance of the frame-chain consistency check, in metres.
pub const FRAME_CHAIN_TOL: f64 = 1e-9;

pub type SoftBlock = SMatrix<f64, 5, 2>;
pub type RigidBlock = SMatrix<f64, 5, 3>;

/// Geometry and spiral constants of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Model {
    pub geom: GeometryParams,
    pub spirals: SpiralTable,
}

impl Model {
    pub fn new(geom: GeometryParams) -> Self {
        Self {
            geom,
            spirals: SpiralTable::default(),
        }
    }

    pub fn jacobian(&self, q: &AgentConfig, s: StiffnessState) -> Result<HybridJacobian> {
        hybrid_jacobian(q, s, &self.geom, &self.spirals)
    }
}

/// Soft-mode gates: only segment 2 soft, only segment 1 soft, both soft.
/// At most one is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModeFlags {
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
}

impl ModeFlags {
    pub fn of(s: StiffnessState) -> Self {
        Self {
            s1: !s.s1 && s.s2,
            s2: s.s1 && !s.s2,
            s3: s.s1 && s.s2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridJacobian {
    pub soft: SoftBlock,
    pub rigid: RigidBlock,
    pub flags: ModeFlags,
}

impl HybridJacobian {
    pub fn matrix(&self) -> Matrix5<f64> {
        let mut m = Matrix5::zeros();
        m.fixed_view_mut::<5, 2>(0, 0).copy_from(&self.soft);
        m.fixed_view_mut::<5, 3>(0, 2).copy_from(&self.rigid);
        m
    }

    pub fn apply(&self, input: &Vector5<f64>) -> Vector5<f64> {
        self.matrix() * input
    }
}

/// Body twist expressed in the global frame; curvature rows are zero.
pub fn rigid_jacobian(q: &AgentConfig) -> RigidBlock {
    let (s, c) = q.phi.sin_cos();
    let mut j = RigidBlock::zeros();
    j[(0, 0)] = c;
    j[(0, 1)] = -s;
    j[(1, 0)] = s;
    j[(1, 1)] = c;
    j[(2, 2)] = 1.0;
    j
}

fn bend_sign(kappa: f64) -> f64 {
    if kappa < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Global body origin while the end frame of `anchor` stays put, evaluated
/// at curvature `kappa_eval` of that segment. The chain passes through the
/// spiral centre of `mode`: global -> body -> segment end -> spiral centre
/// -> body origin.
fn origin_through_centre(
    q: &AgentConfig,
    mode: SpiralMode,
    anchor: Segment,
    kappa_eval: f64,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Vector2<f64> {
    let kappa = q.kappa(anchor);
    let c = spirals
        .get(mode)
        .center_in_segment_frame(geom.l, anchor, bend_sign(kappa));
    let end_to_centre = Pose2::translation(c.x, c.y);
    let chain = q.body_pose() * cc_transform_unchecked(kappa, anchor, geom) * end_to_centre;
    let centre_to_origin = end_to_centre.inverse() * cc_transform_unchecked(kappa_eval, anchor, geom).inverse();
    (chain * centre_to_origin).origin()
}

/// Body origin reconstructed through the spiral centre at the current
/// configuration; fails if the chain does not close on `(x, y)`.
pub fn body_origin_via_spiral(
    q: &AgentConfig,
    mode: SpiralMode,
    anchor: Segment,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Result<Vector2<f64>> {
    crate::geometry::check_curvature(q.kappa(anchor), anchor, geom.kappa_max())?;
    let p = origin_through_centre(q, mode, anchor, q.kappa(anchor), geom, spirals);
    let residual = (p - Vector2::new(q.x, q.y)).norm();
    if residual.is_nan() || residual > FRAME_CHAIN_TOL {
        return Err(Error::FrameChainInconsistent { residual });
    }
    Ok(p)
}

/// Derivative of the global body origin with respect to the curvature of
/// the segment whose end frame is held.
pub fn origin_sensitivity(
    q: &AgentConfig,
    mode: SpiralMode,
    anchor: Segment,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Vector2<f64> {
    let h = FD_STEP * geom.kappa_max();
    let k = q.kappa(anchor);
    let plus = origin_through_centre(q, mode, anchor, k + h, geom, spirals);
    let minus = origin_through_centre(q, mode, anchor, k - h, geom, spirals);
    (plus - minus) / (2.0 * h)
}

/// Column for a soft input that bends `bent` segments at rate `k` per unit
/// speed while the end frame of `anchor` is fixed. `anchor = None` leaves
/// the body at rest.
fn soft_column(
    q: &AgentConfig,
    mode: SpiralMode,
    anchor: Option<Segment>,
    bent: &[Segment],
    k: f64,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Vector5<f64> {
    let mut col = Vector5::zeros();
    if let Some(seg) = anchor {
        let d = origin_sensitivity(q, mode, seg, geom, spirals) * k;
        col[0] = d.x;
        col[1] = d.y;
        col[2] = -seg.side() * geom.l * k;
    }
    for seg in bent {
        col[3 + seg.index()] = k;
    }
    col
}

/// Soft block for stiffness state `s`.
pub fn soft_jacobian(
    q: &AgentConfig,
    s: StiffnessState,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Result<SoftBlock> {
    let l = geom.l;
    for seg in Segment::BOTH {
        crate::geometry::check_curvature(q.kappa(seg), seg, geom.kappa_max())?;
    }
    let mut j = SoftBlock::zeros();
    match (s.s1, s.s2) {
        (false, false) => return Err(Error::FullyRigid),
        (false, true) | (true, false) => {
            let seg = if s.s2 { Segment::Two } else { Segment::One };
            let kappa = q.kappa(seg);
            let adj = spirals.get(SpiralMode::Adjacent).rate_coeffs(kappa, l, seg)?;
            let opp = spirals.get(SpiralMode::Opposite).rate_coeffs(kappa, l, seg)?;
            // The unit beside the soft segment drives the adjacent mode; the
            // other unit drives the opposite mode and swings the body.
            let adjacent = soft_column(q, SpiralMode::Adjacent, None, &[seg], adj.k, geom, spirals);
            let opposite = soft_column(q, SpiralMode::Opposite, Some(seg), &[seg], opp.k, geom, spirals);
            let (c1, c2) = if s.s2 { (opposite, adjacent) } else { (adjacent, opposite) };
            j.set_column(0, &c1);
            j.set_column(1, &c2);
        }
        (true, true) => {
            let mean = 0.5 * (q.kappa1 + q.kappa2);
            for seg in Segment::BOTH {
                crate::geometry::check_curvature(
                    q.kappa(seg),
                    seg,
                    spirals.get(SpiralMode::BothSoft).kappa_bound(l),
                )?;
            }
            let rc = spirals.get(SpiralMode::BothSoft).rate_coeffs(mean, l, Segment::One)?;
            // Driving unit 1 holds unit 2, and vice versa.
            let c1 = soft_column(q, SpiralMode::BothSoft, Some(Segment::Two), &Segment::BOTH, rc.k, geom, spirals);
            let c2 = soft_column(q, SpiralMode::BothSoft, Some(Segment::One), &Segment::BOTH, rc.k, geom, spirals);
            j.set_column(0, &c1);
            j.set_column(1, &c2);
        }
    }
    Ok(j)
}

/// Full hybrid Jacobian; the block of the inactive input family is zero.
pub fn hybrid_jacobian(
    q: &AgentConfig,
    s: StiffnessState,
    geom: &GeometryParams,
    spirals: &SpiralTable,
) -> Result<HybridJacobian> {
    let soft = if s.any_soft() {
        soft_jacobian(q, s, geom, spirals)?
    } else {
        for seg in Segment::BOTH {
            crate::geometry::check_curvature(q.kappa(seg), seg, geom.kappa_max())?;
        }
        SoftBlock::zeros()
    };
    Ok(HybridJacobian {
        soft,
        rigid: if s.any_soft() { RigidBlock::zeros() } else { rigid_jacobian(q) },
        flags: ModeFlags::of(s),
    })
}
