//! TOML run configuration: schema, loading, and conversion into the core
//! library types. Everything is validated up front so commands fail before
//! any output file is created.

use nalgebra::{Matrix3, Vector3};
use quadlqr::{
    AttitudeCommand, ControllerMode, CostWeights, Quaternion, RigidBodyState, Scenario,
    VehicleParams, DEFAULT_INTEGRAL_LIMIT,
};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Top-level schema. Unknown keys anywhere are rejected with the parser's
/// line/column diagnostics, so typos surface at load time.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub vehicle: VehicleConfig,
    pub weights: WeightsConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    /// kg
    pub mass: f64,
    /// Principal moments (kg·m²); exactly one of `inertia_diag` and
    /// `inertia` must be given.
    pub inertia_diag: Option<[f64; 3]>,
    /// Full inertia tensor, row-major (kg·m²).
    pub inertia: Option<[[f64; 3]; 3]>,
    /// m
    pub arm_length: f64,
    /// N/(rad/s)²
    pub thrust_constant: f64,
    /// N·m/(rad/s)²
    pub torque_constant: f64,
    /// rad/s
    pub rotor_speed_max: f64,
    /// Gravity magnitude, m/s² (default 9.81, applied along −z).
    pub gravity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lqr,
    Lqri,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lqr => "lqr",
            Mode::Lqri => "lqri",
        }
    }

    pub fn controller_mode(self) -> ControllerMode {
        match self {
            Mode::Lqr => ControllerMode::Lqr,
            Mode::Lqri => ControllerMode::Lqri,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub mode: Mode,
    /// Q diagonal over the angle-axis error, per axis.
    pub attitude: [f64; 3],
    /// Q diagonal over the body-rate error, per axis.
    pub rate: [f64; 3],
    /// Q diagonal over the error integral, per axis; required for lqri.
    pub integral: Option<[f64; 3]>,
    /// R diagonal over the torque command, per axis.
    pub control: [f64; 3],
    /// Anti-windup clamp on each integral component, rad·s.
    pub integral_limit: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// s; must be an integer multiple of control_dt.
    pub duration: f64,
    /// s (default 0.0005)
    pub physics_dt: Option<f64>,
    /// s (default 0.0025); must be an integer multiple of physics_dt.
    pub control_dt: Option<f64>,
    /// PRNG seed (default 1).
    pub seed: Option<u64>,
    /// Initial roll/pitch/yaw, degrees (default level).
    pub initial_attitude_deg: Option<[f64; 3]>,
    /// Initial body rates, rad/s (default zero).
    pub initial_body_rates: Option<[f64; 3]>,
    /// Constant body-frame disturbance torque, N·m.
    pub disturbance_torque: Option<[f64; 3]>,
    /// Std of the Gaussian torque noise per axis, N·m.
    pub torque_noise_std: Option<[f64; 3]>,
    /// Std of the measurement noise on each angle-axis error component, rad.
    pub attitude_noise_std: Option<f64>,
    /// Std of the measurement noise on each body-rate component, rad/s.
    pub rate_noise_std: Option<f64>,
    /// Timed attitude commands; times strictly increasing, first at 0.
    pub commands: Vec<CommandConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandConfig {
    /// s
    pub time: f64,
    /// Target roll/pitch/yaw, degrees.
    pub attitude_deg: [f64; 3],
    /// Target body rates, rad/s (default zero).
    pub body_rates: Option<[f64; 3]>,
    /// Feedforward thrust, N (default hover thrust).
    pub thrust: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Kv,
    #[default]
    Both,
}

impl ReportFormat {
    pub fn table(self) -> bool {
        matches!(self, ReportFormat::Table | ReportFormat::Both)
    }

    pub fn kv(self) -> bool {
        matches!(self, ReportFormat::Kv | ReportFormat::Both)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Where output files go (default "out", relative to the working
    /// directory).
    pub directory: Option<PathBuf>,
    /// Whether sim/compare write trace CSVs (default true).
    pub write_csv: Option<bool>,
    /// Metrics report format (default both).
    pub report: Option<ReportFormat>,
}

/// Raw config plus the SHA-256 of the file bytes, kept for provenance
/// headers.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sha256: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let text = String::from_utf8(bytes)
        .map_err(|e| ConfigError::Invalid(format!("{} is not UTF-8: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    Ok(LoadedConfig { config, sha256 })
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Everything a command needs, fully validated against the core library's
/// invariants.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub params: VehicleParams,
    pub mode: Mode,
    pub lqr_weights: CostWeights,
    pub lqri_weights: Option<CostWeights>,
    pub integral_limit: Vector3<f64>,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub write_csv: bool,
    pub report: ReportFormat,
    pub config_sha256: String,
}

impl ResolvedRun {
    /// The 9-state weights, or the config error telling the user what to
    /// add.
    pub fn lqri_weights(&self) -> Result<&CostWeights, ConfigError> {
        self.lqri_weights.as_ref().ok_or_else(|| {
            ConfigError::Invalid(
                "weights.integral: required to synthesize the lqri controller".into(),
            )
        })
    }
}

pub fn resolve(loaded: &LoadedConfig, overrides: &Overrides) -> Result<ResolvedRun, ConfigError> {
    let cfg = &loaded.config;
    let params = build_params(&cfg.vehicle)?;
    let mode = overrides.mode.unwrap_or(cfg.weights.mode);

    let w = &cfg.weights;
    let q6: Vec<f64> = w.attitude.iter().chain(w.rate.iter()).copied().collect();
    let lqr_weights = CostWeights::from_diagonals(&q6, &w.control)
        .map_err(|e| ConfigError::Invalid(format!("weights: {e}")))?;
    let lqri_weights = match w.integral {
        Some(zi) => {
            let q9: Vec<f64> = zi.iter().chain(q6.iter()).copied().collect();
            Some(
                CostWeights::from_diagonals(&q9, &w.control)
                    .map_err(|e| ConfigError::Invalid(format!("weights: {e}")))?,
            )
        }
        None => None,
    };
    if mode == Mode::Lqri && lqri_weights.is_none() {
        return Err(ConfigError::Invalid(
            "weights.integral: required when mode = \"lqri\"".into(),
        ));
    }
    let limit = w.integral_limit.unwrap_or(DEFAULT_INTEGRAL_LIMIT);
    if limit.is_nan() || limit < 0.0 {
        return Err(ConfigError::Invalid(format!(
            "weights.integral_limit: must be nonnegative, got {limit}"
        )));
    }

    let scenario = build_scenario(&cfg.scenario, &params, overrides.seed);
    scenario
        .validate()
        .map_err(|e| ConfigError::Invalid(format!("scenario: {e}")))?;

    let out = &cfg.output;
    Ok(ResolvedRun {
        params,
        mode,
        lqr_weights,
        lqri_weights,
        integral_limit: Vector3::from_element(limit),
        scenario,
        out_dir: overrides
            .out_dir
            .clone()
            .or_else(|| out.directory.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        write_csv: out.write_csv.unwrap_or(true),
        report: out.report.unwrap_or_default(),
        config_sha256: loaded.sha256.clone(),
    })
}

fn build_params(v: &VehicleConfig) -> Result<VehicleParams, ConfigError> {
    let inertia = match (&v.inertia_diag, &v.inertia) {
        (Some(d), None) => Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2])),
        (None, Some(rows)) => Matrix3::from_fn(|i, j| rows[i][j]),
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "vehicle: give either inertia_diag or inertia, not both".into(),
            ))
        }
        (None, None) => {
            return Err(ConfigError::Invalid(
                "vehicle: one of inertia_diag or inertia is required".into(),
            ))
        }
    };
    let g = v.gravity.unwrap_or(9.81);
    VehicleParams::new(
        v.mass,
        inertia,
        v.arm_length,
        v.thrust_constant,
        v.torque_constant,
        v.rotor_speed_max,
        Vector3::new(0.0, 0.0, -g),
    )
    .map_err(|e| ConfigError::Invalid(format!("vehicle: {e}")))
}

fn build_scenario(
    s: &ScenarioConfig,
    params: &VehicleParams,
    seed_override: Option<u64>,
) -> Scenario {
    let deg = |v: &[f64; 3]| {
        Quaternion::from_euler(v[0].to_radians(), v[1].to_radians(), v[2].to_radians())
    };
    let mut initial_state = RigidBodyState::hover();
    if let Some(att) = &s.initial_attitude_deg {
        initial_state.attitude = deg(att);
    }
    if let Some(rates) = &s.initial_body_rates {
        initial_state.body_rates = Vector3::new(rates[0], rates[1], rates[2]);
    }
    let commands = s
        .commands
        .iter()
        .map(|c| {
            let rates = c.body_rates.unwrap_or([0.0; 3]);
            (
                c.time,
                AttitudeCommand {
                    target_attitude: deg(&c.attitude_deg),
                    target_body_rates: Vector3::new(rates[0], rates[1], rates[2]),
                    feedforward_thrust: c.thrust.unwrap_or_else(|| params.hover_thrust()),
                },
            )
        })
        .collect();
    let v3 = |v: &Option<[f64; 3]>| {
        let v = v.unwrap_or([0.0; 3]);
        Vector3::new(v[0], v[1], v[2])
    };
    Scenario {
        duration: s.duration,
        physics_dt: s.physics_dt.unwrap_or(0.0005),
        control_dt: s.control_dt.unwrap_or(0.0025),
        initial_state,
        commands,
        disturbance_torque: v3(&s.disturbance_torque),
        torque_noise_std: v3(&s.torque_noise_std),
        attitude_noise_std: s.attitude_noise_std.unwrap_or(0.0),
        rate_noise_std: s.rate_noise_std.unwrap_or(0.0),
        seed: seed_override.or(s.seed).unwrap_or(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[vehicle]
mass = 1.5
inertia_diag = [0.01, 0.02, 0.01]
arm_length = 0.225
thrust_constant = 1.0e-5
torque_constant = 1.7e-7
rotor_speed_max = 1200.0

[weights]
mode = "lqr"
attitude = [0.135, 0.135, 0.135]
rate = [0.0005, 0.0005, 0.0005]
control = [1.0, 1.0, 1.0]

[scenario]
duration = 5.0

[[scenario.commands]]
time = 0.0
attitude_deg = [0.0, 0.0, 0.0]
"#;

    fn loaded(text: &str) -> LoadedConfig {
        LoadedConfig {
            config: toml::from_str(text).expect("test TOML parses"),
            sha256: "feedface".into(),
        }
    }

    fn resolve_text(text: &str) -> Result<ResolvedRun, ConfigError> {
        resolve(&loaded(text), &Overrides::default())
    }

    #[test]
    fn defaults_are_applied() {
        let run = resolve_text(BASE).unwrap();
        assert_eq!(run.mode, Mode::Lqr);
        assert_eq!(run.scenario.physics_dt, 0.0005);
        assert_eq!(run.scenario.control_dt, 0.0025);
        assert_eq!(run.scenario.seed, 1);
        assert!(run.write_csv);
        assert_eq!(run.out_dir, PathBuf::from("out"));
        assert!(run.report.table() && run.report.kv());
        assert_eq!(
            run.integral_limit,
            Vector3::from_element(DEFAULT_INTEGRAL_LIMIT)
        );
        assert!(run.lqri_weights.is_none());
        assert!(run.lqri_weights().is_err());
    }

    #[test]
    fn full_inertia_matrix_is_accepted() {
        let text = BASE.replace(
            "inertia_diag = [0.01, 0.02, 0.01]",
            "inertia = [[0.01, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.01]]",
        );
        let run = resolve_text(&text).unwrap();
        assert_eq!(run.params.inertia()[(1, 1)], 0.02);
    }

    #[test]
    fn both_inertia_forms_are_rejected() {
        let text = BASE.replace(
            "inertia_diag = [0.01, 0.02, 0.01]",
            "inertia_diag = [0.01, 0.02, 0.01]\ninertia = [[0.01, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.01]]",
        );
        let err = resolve_text(&text).unwrap_err().to_string();
        assert!(err.contains("not both"), "{err}");
    }

    #[test]
    fn lqri_mode_requires_integral_weights() {
        let text = BASE.replace("mode = \"lqr\"", "mode = \"lqri\"");
        let err = resolve_text(&text).unwrap_err().to_string();
        assert!(err.contains("integral"), "{err}");
    }

    #[test]
    fn mode_override_is_checked_against_weights() {
        let err = resolve(
            &loaded(BASE),
            &Overrides {
                mode: Some(Mode::Lqri),
                ..Overrides::default()
            },
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("integral"), "{err}");
    }

    #[test]
    fn negative_integral_limit_is_rejected() {
        let text = format!("{BASE}\n[output]\n").replace(
            "control = [1.0, 1.0, 1.0]",
            "control = [1.0, 1.0, 1.0]\nintegral_limit = -0.5",
        );
        let err = resolve_text(&text).unwrap_err().to_string();
        assert!(err.contains("integral_limit"), "{err}");
    }

    #[test]
    fn seed_and_out_overrides_win() {
        let run = resolve(
            &loaded(BASE),
            &Overrides {
                mode: None,
                seed: Some(99),
                out_dir: Some(PathBuf::from("elsewhere")),
            },
        )
        .unwrap();
        assert_eq!(run.scenario.seed, 99);
        assert_eq!(run.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn scenario_errors_are_prefixed() {
        let text = BASE.replace("duration = 5.0", "duration = 5.0011");
        let err = resolve_text(&text).unwrap_err().to_string();
        assert!(err.contains("scenario:"), "{err}");
    }

    #[test]
    fn load_hashes_the_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, BASE).unwrap();
        let a = load(&path).unwrap();
        assert_eq!(a.sha256.len(), 64);
        assert!(a.sha256.chars().all(|c| c.is_ascii_hexdigit()));
        std::fs::write(&path, format!("{BASE}\n# tweak\n")).unwrap();
        let b = load(&path).unwrap();
        assert_ne!(a.sha256, b.sha256);
    }

    #[test]
    fn load_reports_missing_file() {
        let err = load(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }
}
