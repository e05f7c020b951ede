use thiserror::Error;

use crate::geometry::Segment;
use crate::spiral::SpiralMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("curvature {kappa} 1/m of {segment} is outside [-{limit}, {limit}]")]
    CurvatureOutOfRange {
        segment: Segment,
        kappa: f64,
        limit: f64,
    },

    #[error("spiral angle {theta} rad is outside the range of mode {mode}")]
    SpiralAngleOutOfRange { mode: SpiralMode, theta: f64 },

    #[error("velocity input violates soft/rigid exclusivity for stiffness {stiffness}")]
    ExclusivityViolation { stiffness: String },

    #[error("active {mode} block of the configuration matrix is rank deficient (rank {rank})")]
    Singularity { mode: &'static str, rank: usize },

    #[error("soft Jacobian requested for a fully rigid fibre; use the rigid Jacobian")]
    FullyRigid,

    #[error("frame chain through the spiral centre misses the body origin by {residual} m")]
    FrameChainInconsistent { residual: f64 },

    #[error("spiral refit for mode {mode} failed: residual {residual} exceeds {threshold}")]
    OracleFailure {
        mode: SpiralMode,
        residual: f64,
        threshold: f64,
    },

    #[error("planner stalled at step {step}: no stiffness mode reduces the distance {distance}")]
    Stall { step: usize, distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
