//! Kinematics, motion planning and simulation of a two-unit soft-rigid
//! mobile agent: two wheeled locomotion units joined by a fibre of two
//! variable-stiffness segments.

pub mod error;
pub mod export;
pub mod geometry;
pub mod jacobian;
pub mod planner;
pub mod simulator;
pub mod spiral;
pub mod thermal;
pub mod wheelmodel;

pub use error::{Error, Result};
pub use geometry::{cc_transform, wrap_angle, AgentConfig, GeometryParams, Pose2, Segment, StiffnessState};
pub use jacobian::{hybrid_jacobian, rigid_jacobian, soft_jacobian, HybridJacobian, Model};
pub use planner::{fk_reference, plan, sample_config, weighted_distance, HysteresisRule, PlanResult, PlannerParams};
pub use simulator::{fk_step, rollout, Integrator, RolloutError, RolloutOptions, Trajectory};
pub use spiral::{refit_oracle, SpiralFit, SpiralMode, SpiralModel, SpiralTable};
pub use thermal::{request_stiffness, thermal_step, Phase, ThermalParams, ThermalState};
pub use wheelmodel::{config_matrix, VelocityInput, WheelSpeeds};
