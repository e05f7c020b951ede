//! A single planning run: plan, roll out, write artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use softrigid::export::{render_svg, write_plan_csv, write_thermal_csv, write_trajectory_csv, VERSION_LINE};
use softrigid::planner::{plan, PlanResult};
use softrigid::simulator::{rollout, RolloutError, Trajectory};
use softrigid::{AgentConfig, Error, Model, StiffnessState};

use crate::error::{exit, CliError};
use crate::scenario::{Preset, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    /// `max_steps` ran out before reaching `eps_goal`.
    NotConverged,
    /// No stiffness state reduced the distance.
    Stalled,
    ThermalTimeout,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Converged => exit::SUCCESS,
            RunStatus::NotConverged | RunStatus::Stalled => exit::NOT_CONVERGED,
            RunStatus::ThermalTimeout => exit::THERMAL_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEntry {
    pub stiffness: StiffnessState,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauseEntry {
    pub from: StiffnessState,
    pub to: StiffnessState,
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub status: RunStatus,
    pub converged: bool,
    pub seed: u64,
    pub preset: Preset,
    pub q0: AgentConfig,
    pub qt: AgentConfig,
    pub steps: usize,
    pub final_distance: f64,
    /// Remaining error `qt - q_final`, heading wrapped.
    pub final_delta_q: [f64; 5],
    pub mode_runs: Vec<RunEntry>,
    pub mode_switch_count: usize,
    pub last_mode_rigid: bool,
    pub pauses: Vec<PauseEntry>,
    /// Simulated duration including thermal pauses, s.
    pub duration: f64,
    pub saturated_steps: usize,
    pub wheel_saturated_samples: usize,
    pub error: Option<String>,
    pub wall_time: f64,
}

pub struct RunOutcome {
    pub status: RunStatus,
    pub plan: Option<PlanResult>,
    pub trajectory: Option<Trajectory>,
    pub summary: Summary,
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Configurations worth a snapshot: the start of every stiffness run and
/// the end.
fn keyframes(plan: &PlanResult) -> Vec<(usize, StiffnessState)> {
    let runs = plan.mode_runs();
    let mut frames: Vec<(usize, StiffnessState)> = runs.iter().map(|r| (r.start, r.stiffness)).collect();
    let last = runs.last().map_or(StiffnessState::RIGID, |r| r.stiffness);
    frames.push((plan.steps(), last));
    frames
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn write_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    plan: &PlanResult,
    traj: &Trajectory,
) -> Result<(), CliError> {
    let path = dir.join("plan.csv");
    write_plan_csv(create(&path)?, plan).map_err(io(&path))?;
    let path = dir.join("trajectory.csv");
    write_trajectory_csv(create(&path)?, traj).map_err(io(&path))?;
    let path = dir.join("thermal.csv");
    write_thermal_csv(create(&path)?, traj, &cfg.rollout.thermal).map_err(io(&path))?;
    if cfg.keyframes {
        for (i, (step, s)) in keyframes(plan).into_iter().enumerate() {
            let title = format!("step {step}, stiffness {s}");
            let svg = render_svg(&plan.trajectory[step], s, &cfg.geometry, &title);
            let path = dir.join(format!("keyframe_{i:02}.svg"));
            std::fs::write(&path, svg).map_err(io(&path))?;
        }
    }
    Ok(())
}

/// Plans and rolls out `cfg`, writing every artifact into `dir`. Model
/// failures that end the run early are reported through the status;
/// `Err` is reserved for I/O and unexpected kinematic errors.
pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let model = Model::new(cfg.geometry);

    let mut summary = Summary {
        version: &VERSION_LINE[2..],
        status: RunStatus::Converged,
        converged: false,
        seed: cfg.seed,
        preset: cfg.preset,
        q0: cfg.q0,
        qt: cfg.qt,
        steps: 0,
        final_distance: softrigid::weighted_distance(&cfg.q0, &cfg.qt, &cfg.planner.weights),
        final_delta_q: cfg.q0.error_to(&cfg.qt).into(),
        mode_runs: Vec::new(),
        mode_switch_count: 0,
        last_mode_rigid: true,
        pauses: Vec::new(),
        duration: 0.0,
        saturated_steps: 0,
        wheel_saturated_samples: 0,
        error: None,
        wall_time: 0.0,
    };

    let plan = match plan(&cfg.q0, &cfg.qt, &model, &cfg.planner) {
        Ok(p) => p,
        Err(e @ Error::Stall { .. }) => {
            summary.status = RunStatus::Stalled;
            summary.error = Some(e.to_string());
            summary.wall_time = started.elapsed().as_secs_f64();
            write_json(&dir.join("summary.json"), &summary)?;
            return Ok(RunOutcome {
                status: summary.status,
                plan: None,
                trajectory: None,
                summary,
            });
        }
        Err(e) => return Err(e.into()),
    };

    let runs = plan.mode_runs();
    summary.converged = plan.converged;
    summary.status = if plan.converged {
        RunStatus::Converged
    } else {
        RunStatus::NotConverged
    };
    summary.steps = plan.steps();
    summary.final_distance = plan.final_distance();
    summary.final_delta_q = plan.final_config().error_to(&cfg.qt).into();
    summary.mode_runs = runs
        .iter()
        .map(|r| RunEntry {
            stiffness: r.stiffness,
            start: r.start,
            len: r.len,
        })
        .collect();
    summary.mode_switch_count = plan.mode_switch_count;
    summary.last_mode_rigid = runs.last().is_none_or(|r| r.stiffness.is_rigid());
    summary.saturated_steps = plan.saturated_steps.len();

    let traj = match rollout(&cfg.q0, &plan, &model, &cfg.rollout) {
        Ok(t) => t,
        Err(RolloutError::ThermalTimeout { from, to, timeout, partial }) => {
            summary.status = RunStatus::ThermalTimeout;
            summary.error = Some(format!("thermal transition {from} -> {to} did not finish within {timeout} s"));
            *partial
        }
        Err(RolloutError::Kinematics(e)) => return Err(e.into()),
    };
    summary.pauses = traj
        .pauses
        .iter()
        .map(|p| PauseEntry {
            from: p.from,
            to: p.to,
            start: p.start,
            duration: p.duration,
        })
        .collect();
    summary.duration = traj.duration();
    summary.wheel_saturated_samples = traj.samples.iter().filter(|s| s.wheel_saturated).count();

    write_artifacts(dir, cfg, &plan, &traj)?;
    summary.wall_time = started.elapsed().as_secs_f64();
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(RunOutcome {
        status: summary.status,
        plan: Some(plan),
        trajectory: Some(traj),
        summary,
    })
}
