//! Experiment configuration: JSON file schema, command-line overrides, and
//! expansion into the sweep points to run.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use swarmcap_core::engine::{Policy, ScenarioConfig};
use swarmcap_core::grid::GridSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field} {message}, got {value}")]
    Invalid {
        field: &'static str,
        message: &'static str,
        value: f64,
    },
    #[error("unknown policy {0:?}; expected cap, pheromone, or cacoc2")]
    UnknownPolicy(String),
    #[error(transparent)]
    Grid(#[from] swarmcap_core::grid::GridError),
    #[error(transparent)]
    Scenario(#[from] swarmcap_core::engine::ConfigError),
}

fn invalid(field: &'static str, message: &'static str, value: f64) -> ConfigError {
    ConfigError::Invalid {
        field,
        message,
        value,
    }
}

/// JSON experiment file. Every key is optional; omitted keys fall back to
/// the baseline scenario (6 km map, 100 m cells, 1 km range, 0.006 rates,
/// 8000 s, 2 s hellos, 10 s samples, 0.1 s ticks, 90% target). Unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub map_width_m: Option<f64>,
    pub cell_size_m: Option<f64>,
    pub transmission_range_m: Option<f64>,
    pub n_uavs: Option<usize>,
    pub speed_mps: Option<f64>,
    pub evaporation_rate: Option<f64>,
    pub diffusion_rate: Option<f64>,
    pub boundary_pheromone: Option<f64>,
    pub sim_time_s: Option<f64>,
    /// Waypoint interval; when omitted it follows the speed (5 s below
    /// 30 m/s, 10 s above), per sweep point.
    pub decision_interval_s: Option<f64>,
    pub hello_period_s: Option<f64>,
    pub metric_sample_period_s: Option<f64>,
    pub dt_s: Option<f64>,
    pub coverage_target: Option<f64>,
    pub max_turn_rate_deg_s: Option<f64>,
    /// Base policy when no sweep is configured.
    pub policy: Option<String>,
    pub beta: Option<f64>,
    pub f: Option<f64>,
    /// Sweep axes; all empty means a single point from the base fields.
    #[serde(default)]
    pub policies: Vec<String>,
    #[serde(default)]
    pub beta_values: Vec<f64>,
    #[serde(default)]
    pub f_values: Vec<f64>,
    #[serde(default)]
    pub n_uavs_values: Vec<usize>,
    #[serde(default)]
    pub speed_values: Vec<f64>,
    pub runs_per_point: Option<usize>,
    pub seed_base: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Command-line overrides; every set field replaces the corresponding file
/// value (a policy/beta/f/uavs/speed override collapses that sweep axis to
/// the single given value).
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Run only this policy: cap, pheromone, or cacoc2.
    #[arg(long, env = "SWARMCAP_POLICY")]
    pub policy: Option<String>,
    /// Connectivity threshold for the cap policy.
    #[arg(long, env = "SWARMCAP_BETA")]
    pub beta: Option<f64>,
    /// Flocking weight for the cacoc2 policy.
    #[arg(long, env = "SWARMCAP_F")]
    pub f: Option<f64>,
    /// Swarm size.
    #[arg(long = "uavs", env = "SWARMCAP_UAVS")]
    pub uavs: Option<usize>,
    /// UAV speed in m/s.
    #[arg(long, env = "SWARMCAP_SPEED")]
    pub speed: Option<f64>,
    /// Seeded runs per sweep point.
    #[arg(long = "seeds", env = "SWARMCAP_SEEDS")]
    pub seeds: Option<usize>,
    /// First seed; run k of a point uses seed_base + k.
    #[arg(long = "seed-base", env = "SWARMCAP_SEED_BASE")]
    pub seed_base: Option<u64>,
    /// Output directory for runs.csv and summary.csv.
    #[arg(long = "out", env = "SWARMCAP_OUT")]
    pub out: Option<PathBuf>,
    /// Also write per-run 10 s metric samples to timeseries.csv.
    #[arg(long, env = "SWARMCAP_TIMESERIES")]
    pub timeseries: bool,
    /// Worker threads for the sweep (default: available cores).
    #[arg(long, env = "SWARMCAP_JOBS")]
    pub jobs: Option<usize>,
}

/// One instantiated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub policy: Policy,
    pub n_uavs: usize,
    pub speed_mps: f64,
}

/// A validated, fully expanded experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    base: ScenarioConfig,
    decision_interval_s: Option<f64>,
    pub points: Vec<SweepPoint>,
    pub runs_per_point: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    pub timeseries: bool,
    pub jobs: usize,
}

impl ExperimentSpec {
    /// Scenario for one sweep point and seed.
    pub fn config_for(&self, point: &SweepPoint, seed: u64) -> ScenarioConfig {
        let mut config = self.base.clone();
        config.policy = point.policy;
        config.n_uavs = point.n_uavs;
        config.speed_mps = point.speed_mps;
        config.decision_interval_s = self
            .decision_interval_s
            .unwrap_or_else(|| ScenarioConfig::default_decision_interval(point.speed_mps));
        config.seed = seed;
        config
    }

    /// Seeds used for every sweep point.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs_per_point as u64)
            .map(|k| self.seed_base + k)
            .collect()
    }
}

/// Reads and validates an experiment file, applying overrides.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: FileConfig = serde_json::from_str(&text)?;
    build_spec(file, overrides)
}

/// Validates a parsed file plus overrides and expands the sweep.
pub fn build_spec(mut file: FileConfig, overrides: &Overrides) -> Result<ExperimentSpec, ConfigError> {
    if let Some(policy) = &overrides.policy {
        file.policies = vec![policy.clone()];
        file.policy = Some(policy.clone());
    }
    if let Some(beta) = overrides.beta {
        file.beta_values = vec![beta];
        file.beta = Some(beta);
    }
    if let Some(f) = overrides.f {
        file.f_values = vec![f];
        file.f = Some(f);
    }
    if let Some(uavs) = overrides.uavs {
        file.n_uavs_values = vec![uavs];
        file.n_uavs = Some(uavs);
    }
    if let Some(speed) = overrides.speed {
        file.speed_values = vec![speed];
        file.speed_mps = Some(speed);
    }
    if let Some(seeds) = overrides.seeds {
        file.runs_per_point = Some(seeds);
    }
    if let Some(seed_base) = overrides.seed_base {
        file.seed_base = Some(seed_base);
    }
    if let Some(out) = &overrides.out {
        file.out_dir = Some(out.clone());
    }

    let grid = GridSpec::from_map(
        file.map_width_m.unwrap_or(6000.0),
        file.cell_size_m.unwrap_or(100.0),
    )?;

    let runs_per_point = file.runs_per_point.unwrap_or(1);
    if runs_per_point < 1 {
        return Err(invalid("runs_per_point", "must be at least 1", 0.0));
    }

    let base_policy = policy_instance(
        file.policy.as_deref().unwrap_or("cap"),
        file.beta.unwrap_or(2.0),
        file.f.unwrap_or(0.3),
    )?;
    let base_n = file.n_uavs.unwrap_or(20);
    let base_speed = file.speed_mps.unwrap_or(20.0);

    // Expand the policy axis; empty means just the base policy.
    let mut policy_instances = Vec::new();
    if file.policies.is_empty() {
        policy_instances.push(base_policy);
    } else {
        for name in &file.policies {
            match name.as_str() {
                "cap" => {
                    let betas: Vec<f64> = if file.beta_values.is_empty() {
                        vec![file.beta.unwrap_or(2.0)]
                    } else {
                        file.beta_values.clone()
                    };
                    policy_instances.extend(betas.into_iter().map(|beta| Policy::Cap { beta }));
                }
                "cacoc2" => {
                    let fs: Vec<f64> = if file.f_values.is_empty() {
                        vec![file.f.unwrap_or(0.3)]
                    } else {
                        file.f_values.clone()
                    };
                    policy_instances
                        .extend(fs.into_iter().map(|flocking| Policy::Cacoc2 { flocking }));
                }
                "pheromone" => policy_instances.push(Policy::Pheromone),
                other => return Err(ConfigError::UnknownPolicy(other.to_string())),
            }
        }
    }

    let ns: Vec<usize> = if file.n_uavs_values.is_empty() {
        vec![base_n]
    } else {
        file.n_uavs_values.clone()
    };
    let speeds: Vec<f64> = if file.speed_values.is_empty() {
        vec![base_speed]
    } else {
        file.speed_values.clone()
    };

    let mut points = Vec::new();
    for &n_uavs in &ns {
        for &speed_mps in &speeds {
            for &policy in &policy_instances {
                points.push(SweepPoint {
                    policy,
                    n_uavs,
                    speed_mps,
                });
            }
        }
    }

    let base = ScenarioConfig {
        grid,
        n_uavs: base_n,
        speed_mps: base_speed,
        tx_range_m: file.transmission_range_m.unwrap_or(1000.0),
        policy: base_policy,
        evaporation_rate: file.evaporation_rate.unwrap_or(0.006),
        diffusion_rate: file.diffusion_rate.unwrap_or(0.006),
        boundary_pheromone: file.boundary_pheromone.unwrap_or(4.0),
        sim_time_s: file.sim_time_s.unwrap_or(8000.0),
        decision_interval_s: file
            .decision_interval_s
            .unwrap_or_else(|| ScenarioConfig::default_decision_interval(base_speed)),
        hello_period_s: file.hello_period_s.unwrap_or(2.0),
        metric_sample_period_s: file.metric_sample_period_s.unwrap_or(10.0),
        dt_s: file.dt_s.unwrap_or(0.1),
        coverage_target: file.coverage_target.unwrap_or(0.9),
        max_turn_rate_deg_s: file.max_turn_rate_deg_s.unwrap_or(60.0),
        seed: 0,
    };

    let spec = ExperimentSpec {
        base,
        decision_interval_s: file.decision_interval_s,
        points,
        runs_per_point,
        seed_base: file.seed_base.unwrap_or(1),
        out_dir: file.out_dir.unwrap_or_else(|| PathBuf::from("results")),
        timeseries: overrides.timeseries,
        jobs: overrides.jobs.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }),
    };

    // Validate every point's scenario up front so a bad sweep fails before
    // any run starts.
    for point in &spec.points {
        spec.config_for(point, spec.seed_base).validate()?;
    }
    Ok(spec)
}

fn policy_instance(name: &str, beta: f64, f: f64) -> Result<Policy, ConfigError> {
    match name {
        "cap" => Ok(Policy::Cap { beta }),
        "pheromone" => Ok(Policy::Pheromone),
        "cacoc2" => Ok(Policy::Cacoc2 { flocking: f }),
        other => Err(ConfigError::UnknownPolicy(other.to_string())),
    }
}

/// Policy name and tuning parameter as they appear in result files.
pub fn policy_columns(policy: Policy) -> (&'static str, Option<f64>, Option<f64>) {
    match policy {
        Policy::Cap { beta } => ("cap", Some(beta), None),
        Policy::Pheromone => ("pheromone", None, None),
        Policy::Cacoc2 { flocking } => ("cacoc2", None, Some(flocking)),
        Policy::Frozen => ("frozen", None, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_json(json: &str) -> Result<ExperimentSpec, ConfigError> {
        let file: FileConfig = serde_json::from_str(json)?;
        build_spec(file, &Overrides::default())
    }

    #[test]
    fn empty_file_yields_baseline_single_point() {
        let spec = from_json("{}").unwrap();
        assert_eq!(spec.points.len(), 1);
        let config = spec.config_for(&spec.points[0], 1);
        assert_eq!(config.grid.cells_per_side(), 60);
        assert_eq!(config.grid.cell_size_m(), 100.0);
        assert_eq!(config.tx_range_m, 1000.0);
        assert_eq!(config.evaporation_rate, 0.006);
        assert_eq!(config.diffusion_rate, 0.006);
        assert_eq!(config.sim_time_s, 8000.0);
        assert_eq!(config.policy, Policy::Cap { beta: 2.0 });
    }

    #[test]
    fn out_of_range_rate_names_the_field() {
        let err = from_json(r#"{"evaporation_rate": 2.0}"#).unwrap_err();
        assert!(err.to_string().contains("evaporation_rate"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = from_json(r#"{"evaporation": 0.5}"#).unwrap_err();
        assert!(err.to_string().contains("evaporation"), "{err}");
    }

    #[test]
    fn paper_grid_expands_to_eight_points() {
        let spec = from_json(
            r#"{
                "policies": ["cap", "cacoc2", "pheromone"],
                "beta_values": [0.5, 2, 3, 4],
                "f_values": [0.3, 0.6, 0.9],
                "runs_per_point": 30
            }"#,
        )
        .unwrap();
        assert_eq!(spec.points.len(), 8);
        assert_eq!(spec.seeds().len(), 30);
    }

    #[test]
    fn decision_interval_follows_speed_when_unset() {
        let spec = from_json(r#"{"speed_values": [20, 40], "policy": "pheromone"}"#).unwrap();
        assert_eq!(spec.points.len(), 2);
        assert_eq!(spec.config_for(&spec.points[0], 1).decision_interval_s, 5.0);
        assert_eq!(spec.config_for(&spec.points[1], 1).decision_interval_s, 10.0);
        assert_eq!(spec.config_for(&spec.points[1], 1).step_cells(), 4);
    }

    #[test]
    fn overrides_collapse_sweep_axes() {
        let file: FileConfig = serde_json::from_str(
            r#"{"policies": ["cap", "pheromone"], "beta_values": [0.5, 2, 3, 4]}"#,
        )
        .unwrap();
        let overrides = Overrides {
            policy: Some("cap".into()),
            beta: Some(3.0),
            uavs: Some(40),
            speed: Some(40.0),
            seeds: Some(5),
            seed_base: Some(100),
            ..Default::default()
        };
        let spec = build_spec(file, &overrides).unwrap();
        assert_eq!(spec.points.len(), 1);
        assert_eq!(spec.points[0].policy, Policy::Cap { beta: 3.0 });
        assert_eq!(spec.points[0].n_uavs, 40);
        assert_eq!(spec.points[0].speed_mps, 40.0);
        assert_eq!(spec.seeds(), vec![100, 101, 102, 103, 104]);
    }

    #[test]
    fn unknown_policy_is_rejected() {
        let err = from_json(r#"{"policies": ["random-walk"]}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownPolicy(_)));
    }

    #[test]
    fn indivisible_map_is_rejected() {
        let err = from_json(r#"{"map_width_m": 6050.0}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Grid(_)));
    }
}
