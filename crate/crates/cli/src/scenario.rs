//! Scenario files: one JSON document describing a single planning run.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softrigid::planner::{sample_config, HysteresisRule, PlannerParams};
use softrigid::simulator::{Integrator, RolloutOptions};
use softrigid::thermal::ThermalParams;
use softrigid::{AgentConfig, GeometryParams, StiffnessState};

use crate::error::{from_json, CliError};

/// Planner parameter family the scenario starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Weighted distance, progress hysteresis.
    #[default]
    Default,
    /// Unweighted distance, motion hysteresis.
    PaperCompat,
}

impl Preset {
    pub fn params(self) -> PlannerParams {
        match self {
            Preset::Default => PlannerParams::default(),
            Preset::PaperCompat => PlannerParams::paper_compat(),
        }
    }
}

/// Planner fields to change relative to the preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerOverrides {
    pub lambda: Option<f64>,
    pub dt: Option<f64>,
    pub eps_goal: Option<f64>,
    pub eps_progress: Option<f64>,
    pub weights: Option<[f64; 5]>,
    pub damping: Option<f64>,
    pub max_steps: Option<usize>,
    pub hysteresis: Option<HysteresisRule>,
    /// `"free"` or a stiffness pair such as `"00"`.
    pub initial_stiffness: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutOverrides {
    pub pause_timeout: Option<f64>,
    pub omega_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    pub thermal_gating: bool,
    pub integrator: Option<Integrator>,
    pub preset: Preset,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            thermal_gating: true,
            integrator: None,
            preset: Preset::Default,
        }
    }
}

fn default_keyframes() -> bool {
    true
}

/// Scenario document as written. Missing start or target configurations
/// are drawn from `seed`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub geometry: GeometryParams,
    #[serde(default)]
    pub planner: PlannerOverrides,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default)]
    pub rollout: RolloutOverrides,
    pub q0: Option<AgentConfig>,
    pub qt: Option<AgentConfig>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default = "default_keyframes")]
    pub keyframes: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty scenario parses")
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub no_thermal: bool,
    pub integrator: Option<Integrator>,
    pub preset: Option<Preset>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: GeometryParams,
    pub planner: PlannerParams,
    pub rollout: RolloutOptions,
    pub q0: AgentConfig,
    pub qt: AgentConfig,
    pub seed: u64,
    pub preset: Preset,
    pub output: PathBuf,
    pub keyframes: bool,
}

/// Scenario text together with where it came from, for error locations.
pub struct Source<'a> {
    pub path: &'a Path,
    pub text: &'a str,
}

impl Source<'_> {
    /// Line of the innermost key of `path` found in the text, searching each
    /// key after the previous one.
    pub fn key_line(&self, path: &[&str]) -> Option<usize> {
        let mut from = 0;
        let mut found = None;
        for key in path {
            let needle = format!("\"{key}\"");
            let mut search = from;
            let hit = loop {
                let Some(i) = self.text[search..].find(&needle) else {
                    break None;
                };
                let at = search + i;
                let rest = self.text[at + needle.len()..].trim_start();
                if rest.starts_with(':') {
                    break Some(at);
                }
                search = at + needle.len();
            };
            match hit {
                Some(at) => {
                    found = Some(at);
                    from = at + needle.len();
                }
                None => break,
            }
        }
        found.map(|at| self.text[..at].matches('\n').count() + 1)
    }

    pub fn error(&self, path: &[&str], message: impl Into<String>) -> CliError {
        CliError::validation(self.path, self.key_line(path), message)
    }
}

impl Scenario {
    pub fn parse(source: &Source<'_>) -> Result<Self, CliError> {
        serde_json::from_str(source.text).map_err(|e| from_json(source.path, &e))
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let scenario = Self::parse(&Source { path, text: &text })?;
        Ok((scenario, text))
    }

    /// Applies the preset, the file's overrides and then `cli`, and checks
    /// every value.
    pub fn resolve(&self, source: &Source<'_>, cli: &Overrides) -> Result<RunConfig, CliError> {
        let section = |name: &'static str| {
            move |e: softrigid::Error| {
                let message = e.to_string();
                let prefix = format!("{name}.");
                let field: String = message
                    .find(&prefix)
                    .map(|i| {
                        message[i + prefix.len()..]
                            .chars()
                            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                            .collect()
                    })
                    .unwrap_or_default();
                source.error(&[name, &field], message)
            }
        };

        let geometry = self.geometry;
        geometry.validate().map_err(section("geometry"))?;
        self.thermal.validate().map_err(section("thermal"))?;

        let preset = cli.preset.unwrap_or(self.flags.preset);
        let mut planner = preset.params();
        let o = &self.planner;
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { planner.$f = v; } )* };
        }
        apply!(lambda, dt, eps_goal, eps_progress, weights, damping, max_steps, hysteresis);
        if let Some(s) = &o.initial_stiffness {
            planner.initial_stiffness = match s.as_str() {
                "free" => None,
                other => Some(
                    other
                        .parse::<StiffnessState>()
                        .map_err(|e| source.error(&["planner", "initial_stiffness"], format!("{e} (or \"free\")")))?,
                ),
            };
        }
        if let Some(i) = cli.integrator.or(self.flags.integrator) {
            planner.integrator = i;
        }
        planner.validate().map_err(section("planner"))?;

        let mut rollout = RolloutOptions {
            thermal_gating: self.flags.thermal_gating && !cli.no_thermal,
            thermal: self.thermal,
            ..RolloutOptions::default()
        };
        for (name, value, slot) in [
            ("pause_timeout", self.rollout.pause_timeout, &mut rollout.pause_timeout),
            ("omega_max", self.rollout.omega_max, &mut rollout.omega_max),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(source.error(&["rollout", name], format!("rollout.{name} must be positive, got {v}")));
                }
                *slot = v;
            }
        }

        let seed = cli.seed.unwrap_or(self.seed);
        let (q0, qt) = draw_pair(seed, &geometry);
        let q0 = self.q0.unwrap_or(q0);
        let qt = self.qt.unwrap_or(qt);
        for (name, q) in [("q0", &q0), ("qt", &qt)] {
            check_config(source, name, q, &geometry)?;
        }

        Ok(RunConfig {
            geometry,
            planner,
            rollout,
            q0,
            qt,
            seed,
            preset,
            output: cli
                .out
                .clone()
                .or_else(|| self.output.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            keyframes: self.keyframes,
        })
    }
}

/// Start and target drawn from `seed`, in that order.
pub fn draw_pair(seed: u64, geometry: &GeometryParams) -> (AgentConfig, AgentConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q0 = sample_config(&mut rng, geometry);
    let qt = sample_config(&mut rng, geometry);
    (q0, qt)
}

fn check_config(source: &Source<'_>, name: &str, q: &AgentConfig, geometry: &GeometryParams) -> Result<(), CliError> {
    let fields = [("x", q.x), ("y", q.y), ("phi", q.phi), ("kappa1", q.kappa1), ("kappa2", q.kappa2)];
    for (field, v) in fields {
        if !v.is_finite() {
            return Err(source.error(&[name, field], format!("{name}.{field} must be finite")));
        }
    }
    let limit = geometry.kappa_max();
    for (field, v) in [("kappa1", q.kappa1), ("kappa2", q.kappa2)] {
        if v.abs() > limit {
            return Err(source.error(
                &[name, field],
                format!("{name}.{field} = {v} 1/m exceeds the full-circle bound {limit} 1/m"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(text: &str) -> Source<'_> {
        Source {
            path: Path::new("s.json"),
            text,
        }
    }

    #[test]
    fn empty_document_takes_defaults() {
        let s = Scenario::default();
        let cfg = s.resolve(&source("{}"), &Overrides::default()).unwrap();
        assert_eq!(cfg.planner, PlannerParams::default());
        assert!(cfg.rollout.thermal_gating);
        assert_eq!((cfg.q0, cfg.qt), draw_pair(0, &GeometryParams::default()));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "{\n  \"planner\": {\n    \"dt\": 0.1,\n    \"gamma\": 2\n  }\n}";
        match Scenario::parse(&source(text)) {
            Err(CliError::Validation { line, message, .. }) => {
                assert_eq!(line, Some(4));
                assert!(message.contains("gamma"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_value_reports_its_line() {
        let text = "{\n  \"geometry\": {\n    \"l\": 0.04,\n    \"a\": -1\n  }\n}";
        let s = Scenario::parse(&source(text)).unwrap();
        match s.resolve(&source(text), &Overrides::default()) {
            Err(CliError::Validation { line, .. }) => assert_eq!(line, Some(4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curvature_beyond_bound_is_rejected() {
        let text = "{\n  \"q0\": {\"x\": 0, \"y\": 0, \"phi\": 0, \"kappa1\": 0, \"kappa2\": 0},\n  \"qt\": {\"x\": 0, \"y\": 0, \"phi\": 0,\n    \"kappa1\": 500, \"kappa2\": 0}\n}";
        let s = Scenario::parse(&source(text)).unwrap();
        match s.resolve(&source(text), &Overrides::default()) {
            Err(CliError::Validation { line, message, .. }) => {
                assert_eq!(line, Some(4));
                assert!(message.contains("qt.kappa1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn command_line_wins() {
        let text = r#"{"flags": {"preset": "default", "integrator": "euler"}, "output": "a"}"#;
        let s = Scenario::parse(&source(text)).unwrap();
        let cli = Overrides {
            no_thermal: true,
            integrator: Some(Integrator::Rk4),
            preset: Some(Preset::PaperCompat),
            out: Some(PathBuf::from("b")),
            seed: Some(5),
        };
        let cfg = s.resolve(&source(text), &cli).unwrap();
        assert!(!cfg.rollout.thermal_gating);
        assert_eq!(cfg.planner.integrator, Integrator::Rk4);
        assert_eq!(cfg.planner.weights, [1.0; 5]);
        assert_eq!(cfg.output, PathBuf::from("b"));
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let text = r#"{"flags": {"preset": "paper-compat"}, "planner": {"dt": 0.02, "initial_stiffness": "00"}}"#;
        let s = Scenario::parse(&source(text)).unwrap();
        let cfg = s.resolve(&source(text), &Overrides::default()).unwrap();
        assert_eq!(cfg.planner.dt, 0.02);
        assert_eq!(cfg.planner.hysteresis, HysteresisRule::Motion);
        assert_eq!(cfg.planner.initial_stiffness, Some(StiffnessState::RIGID));
    }

    #[test]
    fn key_line_skips_string_values() {
        let text = "{\n  \"output\": \"dt\",\n  \"planner\": {\n\n    \"dt\": -1\n  }\n}";
        assert_eq!(source(text).key_line(&["planner", "dt"]), Some(5));
    }
}
