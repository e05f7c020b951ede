//! Unified wheel configuration matrix and the wheel-speed / body-input maps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wheel_positions_body, AgentConfig, GeometryParams, StiffnessState};

/// Default wheel speed limit, rad/s.
pub const DEFAULT_OMEGA_MAX: f64 = 4.0 * PI;

const EXCLUSIVITY_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-9;

/// Angular velocities of the four wheels, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub omega: [f64; 4],
}

impl WheelSpeeds {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.omega)
    }

    pub fn max_abs(&self) -> f64 {
        self.omega.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// Velocity input: soft-mode unit speeds `(v1, v2)` and rigid-mode body
/// twist `(u0, v0, r0)`. Only one group may be non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityInput {
    pub v1: f64,
    pub v2: f64,
    pub u0: f64,
    pub v0: f64,
    pub r0: f64,
}

impl VelocityInput {
    pub const ZERO: Self = Self {
        v1: 0.0,
        v2: 0.0,
        u0: 0.0,
        v0: 0.0,
        r0: 0.0,
    };

    pub fn soft(v1: f64, v2: f64) -> Self {
        Self { v1, v2, ..Self::ZERO }
    }

    pub fn rigid(u0: f64, v0: f64, r0: f64) -> Self {
        Self {
            u0,
            v0,
            r0,
            ..Self::ZERO
        }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.v1, self.v2, self.u0, self.v0, self.r0)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self {
            v1: v[0],
            v2: v[1],
            u0: v[2],
            v0: v[3],
            r0: v[4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_vector().iter().all(|c| *c == 0.0)
    }

    /// Checks that the inactive group is zero for stiffness `s`.
    pub fn check_exclusive(&self, s: StiffnessState) -> Result<()> {
        let inactive = if s.any_soft() {
            [self.u0, self.v0, self.r0]
        } else {
            [self.v1, self.v2, 0.0]
        };
        if inactive.iter().any(|c| c.abs() > EXCLUSIVITY_TOL) {
            return Err(Error::ExclusivityViolation {
                stiffness: s.to_string(),
            });
        }
        Ok(())
    }
}

/// The 4x5 matrix mapping `VelocityInput` to wheel speeds for one
/// configuration and stiffness state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigMatrix {
    pub matrix: SMatrix<f64, 4, 5>,
    pub stiffness: StiffnessState,
}

impl ConfigMatrix {
    fn active_columns(&self) -> std::ops::Range<usize> {
        if self.stiffness.any_soft() {
            0..2
        } else {
            2..5
        }
    }

    fn mode_name(&self) -> &'static str {
        if self.stiffness.any_soft() {
            "soft"
        } else {
            "rigid"
        }
    }

    /// The non-zero column block (4x2 soft, 4x3 rigid).
    pub fn active_block(&self) -> DMatrix<f64> {
        let cols = self.active_columns();
        DMatrix::from_fn(4, cols.len(), |r, c| self.matrix[(r, cols.start + c)])
    }

    /// Numeric rank of the active block.
    pub fn active_rank(&self) -> usize {
        let block = self.active_block();
        let sv = block.singular_values();
        let max = sv.max();
        sv.iter().filter(|s| **s > RANK_TOL * max.max(1.0)).count()
    }

    /// Moore-Penrose pseudo-inverse of the active block, zero-padded back to
    /// 5x4.
    pub fn pseudo_inverse(&self) -> Result<SMatrix<f64, 5, 4>> {
        let cols = self.active_columns();
        let rank = self.active_rank();
        if rank < cols.len() {
            return Err(Error::Singularity {
                mode: self.mode_name(),
                rank,
            });
        }
        // Full column rank: the left inverse R^-1 Q^T of a thin QR is the
        // pseudo-inverse.
        let qr = self.active_block().qr();
        let pinv = qr.r().try_inverse().ok_or(Error::Singularity {
            mode: self.mode_name(),
            rank,
        })? * qr.q().transpose();
        let mut out = SMatrix::<f64, 5, 4>::zeros();
        for (c, row) in cols.enumerate() {
            for r in 0..4 {
                out[(row, r)] = pinv[(c, r)];
            }
        }
        Ok(out)
    }
}

/// Builds the unified wheel configuration matrix.
pub fn config_matrix(
    q: &AgentConfig,
    s: StiffnessState,
    geom: &GeometryParams,
) -> Result<ConfigMatrix> {
    let wheels = wheel_positions_body(q, geom)?;
    let soft = if s.any_soft() { 1.0 } else { 0.0 };
    let rigid = 1.0 - soft;
    let mut m = SMatrix::<f64, 4, 5>::zeros();
    for (i, w) in wheels.iter().enumerate() {
        let (sp, cp) = w.psi.sin_cos();
        let tau = w.x * sp - w.y * cp;
        let row = [
            if i == 0 { soft } else { 0.0 },
            if i == 2 { -soft } else { 0.0 },
            rigid * cp,
            rigid * sp,
            rigid * tau,
        ];
        for (c, v) in row.iter().enumerate() {
            m[(i, c)] = v / geom.rho_w;
        }
    }
    Ok(ConfigMatrix {
        matrix: m,
        stiffness: s,
    })
}

/// Wheel command produced from a velocity input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    pub speeds: WheelSpeeds,
    /// Set when the raw speeds were scaled down to respect the limit.
    pub saturated: bool,
}

/// `omega = V * upsilon`, uniformly scaled down if any wheel exceeds
/// `omega_max`.
pub fn wheel_speeds(v: &VelocityInput, cm: &ConfigMatrix, omega_max: f64) -> Result<WheelCommand> {
    v.check_exclusive(cm.stiffness)?;
    let raw = cm.matrix * v.to_vector();
    let peak = raw.amax();
    let (scaled, saturated) = if peak > omega_max {
        (raw * (omega_max / peak), true)
    } else {
        (raw, false)
    };
    Ok(WheelCommand {
        speeds: WheelSpeeds {
            omega: [scaled[0], scaled[1], scaled[2], scaled[3]],
        },
        saturated,
    })
}

/// `upsilon = V^+ omega` using the pseudo-inverse of the active block.
pub fn body_twist_from_wheels(omega: &WheelSpeeds, cm: &ConfigMatrix) -> Result<VelocityInput> {
    let pinv = cm.pseudo_inverse()?;
    Ok(VelocityInput::from_vector(&(pinv * omega.to_vector())))
}

/// Numeric rank of the rigid block at configuration `q`.
pub fn rigid_rank(q: &AgentConfig, geom: &GeometryParams) -> Result<usize> {
    Ok(config_matrix(q, StiffnessState::RIGID, geom)?.active_rank())
}
