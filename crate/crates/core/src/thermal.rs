//! Simulated stiffness control: a first-order heater/alloy plant per
//! segment under PI control, with a melt/solidify hysteresis band.
//!
//! All plant constants and gains are tunable defaults, not measured values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Segment, StiffnessState};

/// Sensor range, °C, mapped linearly onto [`SENSOR_VOLTS`].
pub const SENSOR_RANGE: (f64, f64) = (0.0, 85.0);
pub const SENSOR_VOLTS: (f64, f64) = (1.1, 3.3);

/// Upper bound of a latency estimate, s.
pub const LATENCY_HORIZON: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalParams {
    /// Plant time constant, s.
    pub tau: f64,
    /// Steady-state temperature rise at full duty, °C.
    pub gain: f64,
    pub t_amb: f64,
    pub t_set_soft: f64,
    pub t_set_rigid: f64,
    pub t_melt: f64,
    pub t_solid: f64,
    pub kp: f64,
    pub ki: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            tau: 8.0,
            gain: 80.0,
            t_amb: 25.0,
            t_set_soft: 65.0,
            t_set_rigid: 25.0,
            t_melt: 62.0,
            t_solid: 55.0,
            kp: 0.08,
            ki: 0.01,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("gain", self.gain), ("kp", self.kp), ("ki", self.ki)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("thermal.{name} must be positive, got {v}")));
            }
        }
        let ordered = self.t_set_soft > self.t_melt
            && self.t_melt > self.t_solid
            && self.t_solid > self.t_set_rigid
            && self.t_set_rigid >= self.t_amb;
        if !ordered || !self.t_amb.is_finite() || !self.t_set_soft.is_finite() {
            return Err(Error::InvalidParameter(
                "thermal temperatures must satisfy t_set_soft > t_melt > t_solid > t_set_rigid >= t_amb".into(),
            ));
        }
        Ok(())
    }

    pub fn setpoint(&self, soft: bool) -> f64 {
        if soft {
            self.t_set_soft
        } else {
            self.t_set_rigid
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Solid,
    Molten,
    Transitioning,
}

impl Phase {
    pub fn of(temperature: f64, params: &ThermalParams) -> Self {
        if temperature >= params.t_melt {
            Phase::Molten
        } else if temperature <= params.t_solid {
            Phase::Solid
        } else {
            Phase::Transitioning
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Solid => "solid",
            Phase::Molten => "molten",
            Phase::Transitioning => "transitioning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    /// Segment temperature, °C.
    pub temperature: f64,
    /// Heater duty, 0..1.
    pub u: f64,
    /// PI integral, °C·s.
    pub integral: f64,
    pub phase: Phase,
    /// Effective stiffness with hysteresis: turns soft on melting and
    /// rigid only after solidifying.
    pub soft: bool,
}

impl ThermalState {
    pub fn at(temperature: f64, params: &ThermalParams) -> Self {
        let phase = Phase::of(temperature, params);
        Self {
            temperature,
            u: 0.0,
            integral: 0.0,
            phase,
            soft: phase == Phase::Molten,
        }
    }

    /// A segment resting at `temperature` under the PI loop, its integral
    /// holding the duty that balances the plant there.
    pub fn settled(temperature: f64, params: &ThermalParams) -> Self {
        let u = ((temperature - params.t_amb) / params.gain).clamp(0.0, 1.0);
        Self {
            u,
            integral: u / params.ki,
            ..Self::at(temperature, params)
        }
    }

    pub fn ambient(params: &ThermalParams) -> Self {
        Self::at(params.t_amb, params)
    }
}

/// One explicit step of the PI loop and plant.
pub fn thermal_step(state: &ThermalState, setpoint: f64, dt: f64, params: &ThermalParams) -> ThermalState {
    let error = setpoint - state.temperature;
    let candidate = state.integral + error * dt;
    let raw = params.kp * error + params.ki * candidate;
    // Conditional integration: the integral only moves while the output is
    // unsaturated. Below zero the heater is off and the segment cools
    // passively.
    let (u, integral) = if (0.0..=1.0).contains(&raw) {
        (raw, candidate)
    } else {
        ((params.kp * error + params.ki * state.integral).clamp(0.0, 1.0), state.integral)
    };
    let rate = (-(state.temperature - params.t_amb) + params.gain * u) / params.tau;
    let temperature = state.temperature + rate * dt;
    let phase = Phase::of(temperature, params);
    let soft = match phase {
        Phase::Molten => true,
        Phase::Solid => false,
        Phase::Transitioning => state.soft,
    };
    ThermalState {
        temperature,
        u,
        integral,
        phase,
        soft,
    }
}

/// Sensor output voltage for a temperature, saturating at the range ends.
pub fn sensor_voltage(temperature: f64) -> f64 {
    let (t0, t1) = SENSOR_RANGE;
    let (v0, v1) = SENSOR_VOLTS;
    let frac = ((temperature - t0) / (t1 - t0)).clamp(0.0, 1.0);
    v0 + frac * (v1 - v0)
}

/// Whether a segment in `state` has reached the phase required for `soft`.
pub fn in_phase(state: &ThermalState, soft: bool, params: &ThermalParams) -> bool {
    if soft {
        state.temperature >= params.t_melt
    } else {
        state.temperature <= params.t_solid
    }
}

/// Simulated time until `state` reaches the phase for `soft` when driven at
/// the matching setpoint; `None` if it does not within [`LATENCY_HORIZON`].
pub fn transition_latency(state: &ThermalState, soft: bool, params: &ThermalParams, dt: f64) -> Option<f64> {
    let mut s = *state;
    let mut t = 0.0;
    let setpoint = params.setpoint(soft);
    let max_steps = (LATENCY_HORIZON / dt).ceil() as usize;
    for step in 0..=max_steps {
        if in_phase(&s, soft, params) {
            return Some(t);
        }
        s = thermal_step(&s, setpoint, dt, params);
        t = (step + 1) as f64 * dt;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentReadiness {
    pub segment: Segment,
    pub ready: bool,
    /// Estimated remaining time, s; `None` when unreachable.
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readiness {
    pub ready: bool,
    pub segments: [SegmentReadiness; 2],
}

impl Readiness {
    /// Longest per-segment latency.
    pub fn latency(&self) -> Option<f64> {
        self.segments
            .iter()
            .try_fold(0.0f64, |acc, s| s.latency.map(|l| acc.max(l)))
    }
}

/// Readiness of both segments for the stiffness pair `target`.
pub fn request_stiffness(
    target: StiffnessState,
    states: &[ThermalState; 2],
    params: &ThermalParams,
    dt: f64,
) -> Readiness {
    let segments = Segment::BOTH.map(|seg| {
        let state = &states[seg.index()];
        let soft = target.is_soft(seg);
        let ready = in_phase(state, soft, params);
        SegmentReadiness {
            segment: seg,
            ready,
            latency: if ready { Some(0.0) } else { transition_latency(state, soft, params, dt) },
        }
    });
    Readiness {
        ready: segments.iter().all(|s| s.ready),
        segments,
    }
}
