//! Forward kinematics integration and thermally gated rollout of a plan.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AgentConfig, Segment, StiffnessState};
use crate::jacobian::Model;
use crate::planner::PlanResult;
use crate::thermal::{in_phase, thermal_step, ThermalParams, ThermalState};
use crate::wheelmodel::{config_matrix, VelocityInput, WheelSpeeds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::InvalidParameter(format!(
                "unknown integrator {other:?}, expected euler or rk4"
            ))),
        }
    }
}

/// Curvature bound of a stiffness state: a half circle per segment while
/// both bend together, a full circle otherwise.
pub fn curvature_bound(s: StiffnessState, l: f64) -> f64 {
    if s.s1 && s.s2 {
        PI / l
    } else {
        TAU / l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub q: AgentConfig,
    /// A curvature hit its bound and was clamped.
    pub saturated: bool,
}

fn clamp_curvatures(q: &mut AgentConfig, bound: f64) -> bool {
    let mut hit = false;
    for seg in Segment::BOTH {
        let k = q.kappa(seg);
        let c = k.clamp(-bound, bound);
        if c != k {
            q.set_kappa(seg, c);
            hit = true;
        }
    }
    hit
}

/// One integration step of `q' = J(q, s) v`.
pub fn fk_step(
    q: &AgentConfig,
    s: StiffnessState,
    v: &VelocityInput,
    dt: f64,
    model: &Model,
    integrator: Integrator,
) -> Result<Step> {
    v.check_exclusive(s)?;
    if v.is_zero() {
        return Ok(Step { q: *q, saturated: false });
    }
    let input = v.to_vector();
    let bound = curvature_bound(s, model.geom.l);
    let rate = |x: &AgentConfig| -> Result<nalgebra::Vector5<f64>> { Ok(model.jacobian(x, s)?.apply(&input)) };
    let x0 = q.to_vector();
    let next = match integrator {
        Integrator::Euler => x0 + rate(q)? * dt,
        Integrator::Rk4 => {
            let at = |dx: nalgebra::Vector5<f64>| {
                let mut c = AgentConfig::from_vector(&(x0 + dx));
                clamp_curvatures(&mut c, bound);
                c
            };
            let k1 = rate(q)?;
            let k2 = rate(&at(k1 * (dt / 2.0)))?;
            let k3 = rate(&at(k2 * (dt / 2.0)))?;
            let k4 = rate(&at(k3 * dt))?;
            x0 + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)
        }
    };
    let mut out = AgentConfig::from_vector(&next);
    let saturated = clamp_curvatures(&mut out, bound);
    Ok(Step { q: out, saturated })
}

/// Snapshot of the agent at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub q: AgentConfig,
    /// Commanded stiffness.
    pub s: StiffnessState,
    pub thermal: [ThermalState; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: SimState,
    /// Input applied from this instant to the next.
    pub v: VelocityInput,
    pub omega: WheelSpeeds,
    /// Motion is held while the segments change phase.
    pub paused: bool,
    /// Curvature clamped during the step.
    pub saturated: bool,
    /// Some wheel exceeds the speed limit.
    pub wheel_saturated: bool,
}

/// One thermal wait inserted at a stiffness-run boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pause {
    pub from: StiffnessState,
    pub to: StiffnessState,
    pub start: f64,
    pub duration: f64,
    /// Plan step at which motion resumes.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub pauses: Vec<Pause>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.state.t)
    }

    pub fn final_config(&self) -> Option<AgentConfig> {
        self.samples.last().map(|s| s.state.q)
    }

    /// Configuration at the start of every plan step plus the final one,
    /// skipping thermal pauses.
    pub fn motion_configs(&self) -> Vec<AgentConfig> {
        self.samples.iter().filter(|s| !s.paused).map(|s| s.state.q).collect()
    }

    pub fn saturation_events(&self) -> usize {
        self.samples.iter().filter(|s| s.saturated).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutOptions {
    pub thermal_gating: bool,
    pub thermal: ThermalParams,
    /// Longest admissible single pause, s.
    pub pause_timeout: f64,
    /// Wheel speed above which samples are flagged, rad/s. The plan is
    /// executed unscaled.
    pub omega_max: f64,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            thermal_gating: true,
            thermal: ThermalParams::default(),
            pause_timeout: 600.0,
            omega_max: crate::wheelmodel::DEFAULT_OMEGA_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RolloutError {
    #[error("thermal transition {from} -> {to} did not finish within {timeout} s")]
    ThermalTimeout {
        from: StiffnessState,
        to: StiffnessState,
        timeout: f64,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Kinematics(#[from] Error),
}

fn thermal_advance(states: &[ThermalState; 2], s: StiffnessState, dt: f64, params: &ThermalParams) -> [ThermalState; 2] {
    Segment::BOTH.map(|seg| thermal_step(&states[seg.index()], params.setpoint(s.is_soft(seg)), dt, params))
}

/// Executes the schedules of `plan` from `q0`. With gating on, the agent
/// starts rigid at ambient temperature and holds still at every change of
/// commanded stiffness until both segments are in phase.
pub fn rollout(
    q0: &AgentConfig,
    plan: &PlanResult,
    model: &Model,
    options: &RolloutOptions,
) -> std::result::Result<Trajectory, RolloutError> {
    let dt = plan.params.dt;
    let integrator = plan.params.integrator;
    let tp = &options.thermal;
    let mut state = SimState {
        t: 0.0,
        q: *q0,
        s: StiffnessState::RIGID,
        thermal: [ThermalState::ambient(tp); 2],
    };
    let mut traj = Trajectory::default();
    let wheel_speeds = |q: &AgentConfig, s: StiffnessState, v: &VelocityInput| -> Result<WheelSpeeds> {
        let cm = config_matrix(q, s, &model.geom)?;
        Ok(crate::wheelmodel::wheel_speeds(v, &cm, f64::INFINITY)?.speeds)
    };
    let mut clock_steps: u64 = 0;
    for (k, (&s, v)) in plan.stiffness_schedule.iter().zip(&plan.velocity_schedule).enumerate() {
        if s != state.s {
            if options.thermal_gating {
                let start = state.t;
                let from = state.s;
                state.s = s;
                while !Segment::BOTH.iter().all(|seg| in_phase(&state.thermal[seg.index()], s.is_soft(*seg), tp)) {
                    traj.samples.push(Sample {
                        state,
                        v: VelocityInput::ZERO,
                        omega: WheelSpeeds::default(),
                        paused: true,
                        saturated: false,
                        wheel_saturated: false,
                    });
                    if state.t - start >= options.pause_timeout {
                        return Err(RolloutError::ThermalTimeout {
                            from,
                            to: s,
                            timeout: options.pause_timeout,
                            partial: Box::new(traj),
                        });
                    }
                    state.thermal = thermal_advance(&state.thermal, s, dt, tp);
                    clock_steps += 1;
                    state.t = clock_steps as f64 * dt;
                }
                traj.pauses.push(Pause {
                    from,
                    to: s,
                    start,
                    duration: state.t - start,
                    step: k,
                });
            } else {
                state.s = s;
            }
        }
        let step = fk_step(&state.q, s, v, dt, model, integrator)?;
        let omega = wheel_speeds(&state.q, s, v)?;
        traj.samples.push(Sample {
            state,
            v: *v,
            omega,
            paused: false,
            saturated: step.saturated,
            wheel_saturated: omega.max_abs() > options.omega_max,
        });
        if options.thermal_gating {
            state.thermal = thermal_advance(&state.thermal, s, dt, tp);
        }
        state.q = step.q;
        clock_steps += 1;
        state.t = clock_steps as f64 * dt;
    }
    traj.samples.push(Sample {
        state,
        v: VelocityInput::ZERO,
        omega: WheelSpeeds::default(),
        paused: false,
        saturated: false,
        wheel_saturated: false,
    });
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model() -> Model {
        Model::default()
    }

    #[test]
    fn zero_input_is_identity() {
        let q = AgentConfig::new(0.1, 0.2, 0.3, 10.0, -20.0);
        for s in StiffnessState::ALL {
            let out = fk_step(&q, s, &VelocityInput::ZERO, 0.05, &model(), Integrator::Euler).unwrap();
            assert_eq!(out.q, q);
        }
    }

    #[test]
    fn rigid_translation_is_exact() {
        let q = AgentConfig::default();
        let v = VelocityInput::rigid(0.25, 0.0, 0.0);
        for integ in [Integrator::Euler, Integrator::Rk4] {
            let out = fk_step(&q, StiffnessState::RIGID, &v, 0.0625, &model(), integ).unwrap();
            assert_eq!(out.q.x, 0.25 * 0.0625);
            assert_eq!((out.q.y, out.q.phi), (0.0, 0.0));
        }
    }

    #[test]
    fn exclusivity_enforced() {
        let v = VelocityInput::rigid(0.1, 0.0, 0.0);
        let r = fk_step(&AgentConfig::default(), StiffnessState::SEG1_SOFT, &v, 0.05, &model(), Integrator::Euler);
        assert!(matches!(r, Err(Error::ExclusivityViolation { .. })));
    }

    #[test]
    fn curvature_saturation_is_reported() {
        let m = model();
        let bound = curvature_bound(StiffnessState::BOTH_SOFT, m.geom.l);
        let q = AgentConfig::new(0.0, 0.0, 0.0, bound - 0.1, bound - 0.1);
        let out = fk_step(&q, StiffnessState::BOTH_SOFT, &VelocityInput::soft(0.01, 0.0), 0.05, &m, Integrator::Euler).unwrap();
        assert!(out.saturated);
        assert_eq!(out.q.kappa1, bound);
    }

    fn soft_endpoint(dt: f64, integ: Integrator) -> AgentConfig {
        let m = model();
        let v = VelocityInput::soft(0.004, 0.0);
        let mut q = AgentConfig::new(0.0, 0.0, 0.0, 0.0, 20.0);
        let n = (1.0 / dt).round() as usize;
        for _ in 0..n {
            q = fk_step(&q, StiffnessState::SEG2_SOFT, &v, dt, &m, integ).unwrap().q;
        }
        q
    }

    #[test]
    fn euler_converges_first_order() {
        let reference = soft_endpoint(0.1 / 100.0, Integrator::Rk4).to_vector();
        let e1 = (soft_endpoint(0.1, Integrator::Euler).to_vector() - reference).norm();
        let e2 = (soft_endpoint(0.05, Integrator::Euler).to_vector() - reference).norm();
        let ratio = e1 / e2;
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_beats_euler() {
        let reference = soft_endpoint(0.001, Integrator::Rk4).to_vector();
        let eu = (soft_endpoint(0.1, Integrator::Euler).to_vector() - reference).norm();
        let rk = (soft_endpoint(0.1, Integrator::Rk4).to_vector() - reference).norm();
        assert!(rk < 1e-3 * eu);
    }

    #[test]
    fn integrator_parses() {
        assert_eq!("rk4".parse::<Integrator>().unwrap(), Integrator::Rk4);
        assert!("midpoint".parse::<Integrator>().is_err());
        assert_abs_diff_eq!(curvature_bound(StiffnessState::SEG1_SOFT, 0.04), TAU / 0.04);
    }
}
