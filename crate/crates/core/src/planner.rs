//! Greedy mode-switching resolved-rate planner.
//!
//! Every step tries all four stiffness states, takes a damped least-squares
//! step towards the target in each, and keeps the one that ends closest.
//! A stiffness change costs a phase transition, so the previous state is
//! retained for as long as it still makes progress.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector5};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, AgentConfig, GeometryParams, StiffnessState};
use crate::jacobian::Model;
use crate::simulator::{fk_step, Integrator};
use crate::wheelmodel::VelocityInput;

/// When the previous stiffness state is retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HysteresisRule {
    /// While it still reduces the distance to the target by more than
    /// `eps_progress`.
    #[default]
    Progress,
    /// While it still moves the configuration by more than `eps_progress`.
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Feedback gain, 1/s.
    pub lambda: f64,
    /// Step, s.
    pub dt: f64,
    pub eps_goal: f64,
    pub eps_progress: f64,
    /// Diagonal weights of the distance over `(x, y, phi, kappa1, kappa2)`.
    pub weights: [f64; 5],
    pub damping: f64,
    pub max_steps: usize,
    pub hysteresis: HysteresisRule,
    pub integrator: Integrator,
    /// Stiffness the agent starts in, retained by the hysteresis on the
    /// first step. `None` lets the first step choose freely.
    pub initial_stiffness: Option<StiffnessState>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            dt: 0.05,
            eps_goal: 0.02,
            eps_progress: 1e-5,
            weights: [1.0, 1.0, 0.05, 0.001, 0.001],
            damping: 1e-3,
            max_steps: 10_000,
            hysteresis: HysteresisRule::Progress,
            integrator: Integrator::Euler,
            initial_stiffness: None,
        }
    }
}

impl PlannerParams {
    /// Unweighted Euclidean distance over all five coordinates, with the
    /// previous state kept for as long as it still moves the agent.
    pub fn paper_compat() -> Self {
        Self {
            weights: [1.0; 5],
            hysteresis: HysteresisRule::Motion,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("lambda", self.lambda),
            ("dt", self.dt),
            ("eps_goal", self.eps_goal),
            ("eps_progress", self.eps_progress),
            ("damping", self.damping),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("planner.{name} must be positive, got {v}")));
            }
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!("planner.weights must be positive, got {w}")));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidParameter("planner.max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weighted distance between two configurations, angle wrapped.
pub fn weighted_distance(q: &AgentConfig, target: &AgentConfig, weights: &[f64; 5]) -> f64 {
    q.error_to(target)
        .component_mul(&Vector5::from_column_slice(weights))
        .norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub stiffness_schedule: Vec<StiffnessState>,
    pub velocity_schedule: Vec<VelocityInput>,
    /// Start configuration followed by the configuration after each step.
    pub trajectory: Vec<AgentConfig>,
    /// Weighted distance to the target at every trajectory entry.
    pub distances: Vec<f64>,
    /// Steps whose curvature was clamped.
    pub saturated_steps: Vec<usize>,
    pub mode_switch_count: usize,
    pub converged: bool,
    pub params: PlannerParams,
}

/// A maximal stretch of steps with equal stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeRun {
    pub stiffness: StiffnessState,
    pub start: usize,
    pub len: usize,
}

impl PlanResult {
    pub fn steps(&self) -> usize {
        self.stiffness_schedule.len()
    }

    pub fn mode_runs(&self) -> Vec<ModeRun> {
        let mut runs: Vec<ModeRun> = Vec::new();
        for (i, &s) in self.stiffness_schedule.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.stiffness == s => r.len += 1,
                _ => runs.push(ModeRun {
                    stiffness: s,
                    start: i,
                    len: 1,
                }),
            }
        }
        runs
    }

    pub fn final_distance(&self) -> f64 {
        *self.distances.last().unwrap_or(&0.0)
    }

    pub fn final_config(&self) -> AgentConfig {
        *self.trajectory.last().expect("trajectory holds the start configuration")
    }
}

/// Outcome of one stiffness hypothesis at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub stiffness: StiffnessState,
    pub velocity: VelocityInput,
    pub next: AgentConfig,
    pub distance: f64,
    pub saturated: bool,
}

/// Damped least-squares velocity towards `target` in stiffness state `s`.
pub fn dls_velocity(
    q: &AgentConfig,
    target: &AgentConfig,
    s: StiffnessState,
    model: &Model,
    params: &PlannerParams,
) -> Result<VelocityInput> {
    let j = model.jacobian(q, s)?.matrix();
    let e = q.error_to(target) * params.lambda;
    let a = j * j.transpose() + Matrix5::identity() * params.damping.powi(2);
    let x = a
        .cholesky()
        .ok_or(Error::Singularity { mode: "damped", rank: 0 })?
        .solve(&e);
    let mut v = VelocityInput::from_vector(&(j.transpose() * x));
    // Inactive columns are zero, so this only removes rounding residue.
    if s.any_soft() {
        v.u0 = 0.0;
        v.v0 = 0.0;
        v.r0 = 0.0;
    } else {
        v.v1 = 0.0;
        v.v2 = 0.0;
    }
    Ok(v)
}

/// Evaluates the four stiffness hypotheses at `q`. Both-soft is skipped
/// (`None`) when a curvature already exceeds its half-circle bound.
pub fn hypotheses(
    q: &AgentConfig,
    target: &AgentConfig,
    model: &Model,
    params: &PlannerParams,
) -> Result<[Option<Hypothesis>; 4]> {
    let mut out = [None; 4];
    let half = PI / model.geom.l;
    for (i, s) in StiffnessState::ALL.into_iter().enumerate() {
        if s == StiffnessState::BOTH_SOFT && (q.kappa1.abs() > half || q.kappa2.abs() > half) {
            continue;
        }
        let velocity = dls_velocity(q, target, s, model, params)?;
        let step = fk_step(q, s, &velocity, params.dt, model, params.integrator)?;
        out[i] = Some(Hypothesis {
            stiffness: s,
            velocity,
            next: step.q,
            distance: weighted_distance(&step.q, target, &params.weights),
            saturated: step.saturated,
        });
    }
    Ok(out)
}

/// Plans from `q0` to `target`.
pub fn plan(q0: &AgentConfig, target: &AgentConfig, model: &Model, params: &PlannerParams) -> Result<PlanResult> {
    params.validate()?;
    model.geom.validate()?;
    let kmax = model.geom.kappa_max();
    for q in [q0, target] {
        if !q.is_finite() {
            return Err(Error::InvalidParameter("configuration must be finite".into()));
        }
        for seg in crate::geometry::Segment::BOTH {
            crate::geometry::check_curvature(q.kappa(seg), seg, kmax)?;
        }
    }

    let mut q = *q0;
    let mut d = weighted_distance(&q, target, &params.weights);
    let mut result = PlanResult {
        stiffness_schedule: Vec::new(),
        velocity_schedule: Vec::new(),
        trajectory: vec![q],
        distances: vec![d],
        saturated_steps: Vec::new(),
        mode_switch_count: 0,
        converged: d <= params.eps_goal,
        params: *params,
    };
    let mut prev = params.initial_stiffness.map(|s| s.index());
    for step in 0..params.max_steps {
        if result.converged {
            break;
        }
        let hyp = hypotheses(&q, target, model, params)?;
        let mut best: Option<usize> = None;
        for (i, h) in hyp.iter().enumerate() {
            if let Some(h) = h {
                if best.is_none_or(|b| h.distance < hyp[b].unwrap().distance) {
                    best = Some(i);
                }
            }
        }
        let best = best.expect("rigid hypothesis is always available");
        let best_d = hyp[best].unwrap().distance;
        if best_d >= d {
            return Err(Error::Stall { step, distance: d });
        }
        let mut chosen = best;
        if let Some(prev) = prev.filter(|&p| p != best) {
            if let Some(h) = &hyp[prev] {
                let keep = match params.hysteresis {
                    HysteresisRule::Progress => d - h.distance > params.eps_progress,
                    HysteresisRule::Motion => {
                        h.distance < d && (h.next.to_vector() - q.to_vector()).norm() > params.eps_progress
                    }
                };
                if keep {
                    chosen = prev;
                }
            }
        }
        let h = hyp[chosen].unwrap();
        if step > 0 && Some(chosen) != prev {
            result.mode_switch_count += 1;
        }
        if h.saturated {
            result.saturated_steps.push(step);
        }
        result.stiffness_schedule.push(h.stiffness);
        result.velocity_schedule.push(h.velocity);
        result.trajectory.push(h.next);
        result.distances.push(h.distance);
        q = h.next;
        d = h.distance;
        prev = Some(chosen);
        result.converged = d <= params.eps_goal;
    }
    Ok(result)
}

/// Linear interpolation from `q0` to `target` in `steps` equal steps, the
/// angle taking the shorter way round.
pub fn fk_reference(q0: &AgentConfig, target: &AgentConfig, steps: usize) -> Vec<AgentConfig> {
    if steps == 0 {
        return vec![*q0];
    }
    let a = q0.to_vector();
    let mut delta = target.to_vector() - a;
    delta[2] = wrap_angle(target.phi - q0.phi);
    (0..=steps)
        .map(|k| {
            if k == steps {
                AgentConfig {
                    phi: q0.phi + delta[2],
                    ..*target
                }
            } else {
                AgentConfig::from_vector(&(a + delta * (k as f64 / steps as f64)))
            }
        })
        .collect()
}

/// Uniform random configuration: position within 0.3 m of the origin on
/// each axis, any heading, any admissible curvature.
pub fn sample_config<R: Rng + ?Sized>(rng: &mut R, geom: &GeometryParams) -> AgentConfig {
    let kmax = geom.kappa_max();
    AgentConfig::new(
        rng.random_range(-0.3..=0.3),
        rng.random_range(-0.3..=0.3),
        rng.random_range(-PI..=PI),
        rng.random_range(-kmax..=kmax),
        rng.random_range(-kmax..=kmax),
    )
}
