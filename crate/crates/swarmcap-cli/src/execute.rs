//! Sweep execution and CSV emission.
//!
//! Every (sweep point, seed) pair becomes one job on a worker pool. Results
//! land in `runs.csv` (one row per run, with a full config echo) and
//! `summary.csv` (one row per point with means and standard errors);
//! `--timeseries` additionally writes the 10 s metric samples per run.
//! Files are written to a temporary name and renamed, so a re-run replaces
//! them atomically; a panicking or failing run is preserved as a `failed`
//! row instead of aborting the sweep.

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use swarmcap_core::engine::{mean_sem, run, RunResult, ScenarioConfig};

use crate::config::{policy_columns, ExperimentSpec};

#[derive(Debug, Error)]
pub enum ExecuteError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExecuteError + '_ {
    move |source| ExecuteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of `runs.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRow {
    pub policy: String,
    pub beta: Option<f64>,
    pub f: Option<f64>,
    pub n_uavs: usize,
    pub speed_mps: f64,
    pub seed: u64,
    pub tc_s: Option<f64>,
    pub tc_censored: Option<bool>,
    pub fairness: Option<f64>,
    pub ncc_mean: Option<f64>,
    pub anc_mean: Option<f64>,
    pub ncc_mean_to_tc: Option<f64>,
    pub anc_mean_to_tc: Option<f64>,
    pub map_width_m: f64,
    pub cell_size_m: f64,
    pub transmission_range_m: f64,
    pub evaporation_rate: f64,
    pub diffusion_rate: f64,
    pub boundary_pheromone: f64,
    pub sim_time_s: f64,
    pub decision_interval_s: f64,
    pub hello_period_s: f64,
    pub metric_sample_period_s: f64,
    pub dt_s: f64,
    pub coverage_target: f64,
    pub max_turn_rate_deg_s: f64,
    pub status: String,
}

/// One row of `summary.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub beta: Option<f64>,
    pub f: Option<f64>,
    pub n_uavs: usize,
    pub speed_mps: f64,
    pub runs: usize,
    pub failed: usize,
    pub tc_s: f64,
    pub tc_s_sem: f64,
    pub tc_censored_runs: usize,
    pub fairness: f64,
    pub fairness_sem: f64,
    pub ncc_mean: f64,
    pub ncc_mean_sem: f64,
    pub anc_mean: f64,
    pub anc_mean_sem: f64,
    pub ncc_mean_to_tc: f64,
    pub ncc_mean_to_tc_sem: f64,
    pub anc_mean_to_tc: f64,
    pub anc_mean_to_tc_sem: f64,
}

/// One row of `timeseries.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SampleRow {
    pub policy: String,
    pub beta: Option<f64>,
    pub f: Option<f64>,
    pub n_uavs: usize,
    pub speed_mps: f64,
    pub seed: u64,
    pub t_s: f64,
    pub ncc: usize,
    pub anc: f64,
    pub covered_fraction: f64,
}

/// Outcome of a sweep.
#[derive(Debug)]
pub struct ExecuteReport {
    pub total_runs: usize,
    pub failed_runs: usize,
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub timeseries_csv: Option<PathBuf>,
}

struct Job {
    point_index: usize,
    seed: u64,
}

/// Runs the whole sweep and writes the result files.
pub fn execute(spec: &ExperimentSpec) -> Result<ExecuteReport, ExecuteError> {
    let seeds = spec.seeds();
    let jobs: Vec<Job> = spec
        .points
        .iter()
        .enumerate()
        .flat_map(|(point_index, _)| {
            seeds.iter().map(move |&seed| Job { point_index, seed })
        })
        .collect();

    let mut outcomes: Vec<Option<Result<RunResult, String>>> =
        jobs.iter().map(|_| None).collect();
    let workers = spec.jobs.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (sender, receiver) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let sender = sender.clone();
            let next = &next;
            let jobs = &jobs;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let config = spec.config_for(&spec.points[jobs[i].point_index], jobs[i].seed);
                let outcome = run_one(&config);
                if sender.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
    });
    drop(sender);
    for (i, outcome) in receiver {
        outcomes[i] = Some(outcome);
    }
    let outcomes: Vec<Result<RunResult, String>> =
        outcomes.into_iter().map(|o| o.expect("job ran")).collect();

    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let runs_csv = spec.out_dir.join("runs.csv");
    let summary_csv = spec.out_dir.join("summary.csv");
    let timeseries_csv = spec.timeseries.then(|| spec.out_dir.join("timeseries.csv"));

    write_runs(spec, &jobs, &outcomes, &runs_csv)?;
    write_summary(spec, &jobs, &outcomes, &summary_csv)?;
    if let Some(path) = &timeseries_csv {
        write_timeseries(spec, &jobs, &outcomes, path)?;
    }

    Ok(ExecuteReport {
        total_runs: jobs.len(),
        failed_runs: outcomes.iter().filter(|o| o.is_err()).count(),
        runs_csv,
        summary_csv,
        timeseries_csv,
    })
}

fn run_one(config: &ScenarioConfig) -> Result<RunResult, String> {
    match catch_unwind(AssertUnwindSafe(|| run(config))) {
        Ok(Ok(result)) => Ok(result),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic_message(&panic)),
    }
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "run panicked".to_string()
    }
}

/// Writes `rows` through a closure into `path` atomically.
fn write_atomic<F>(path: &Path, write: F) -> Result<(), ExecuteError>
where
    F: FnOnce(&mut csv::Writer<fs::File>) -> Result<(), ExecuteError>,
{
    let tmp = path.with_extension("csv.tmp");
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut writer = csv::Writer::from_writer(file);
    write(&mut writer)?;
    let mut file = writer.into_inner().map_err(|e| ExecuteError::Io {
        path: tmp.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    file.flush().map_err(io_err(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

fn write_runs(
    spec: &ExperimentSpec,
    jobs: &[Job],
    outcomes: &[Result<RunResult, String>],
    path: &Path,
) -> Result<(), ExecuteError> {
    write_atomic(path, |writer| {
        for (job, outcome) in jobs.iter().zip(outcomes) {
            let point = &spec.points[job.point_index];
            let config = spec.config_for(point, job.seed);
            let (policy, beta, f) = policy_columns(point.policy);
            let row = match outcome {
                Ok(result) => RunRow {
                    policy: policy.to_string(),
                    beta,
                    f,
                    n_uavs: point.n_uavs,
                    speed_mps: point.speed_mps,
                    seed: job.seed,
                    tc_s: Some(result.tc_s),
                    tc_censored: Some(result.tc_censored),
                    fairness: Some(result.fairness),
                    ncc_mean: Some(result.ncc_mean),
                    anc_mean: Some(result.anc_mean),
                    ncc_mean_to_tc: Some(result.ncc_mean_to_tc),
                    anc_mean_to_tc: Some(result.anc_mean_to_tc),
                    map_width_m: config.grid.width_m(),
                    cell_size_m: config.grid.cell_size_m(),
                    transmission_range_m: config.tx_range_m,
                    evaporation_rate: config.evaporation_rate,
                    diffusion_rate: config.diffusion_rate,
                    boundary_pheromone: config.boundary_pheromone,
                    sim_time_s: config.sim_time_s,
                    decision_interval_s: config.decision_interval_s,
                    hello_period_s: config.hello_period_s,
                    metric_sample_period_s: config.metric_sample_period_s,
                    dt_s: config.dt_s,
                    coverage_target: config.coverage_target,
                    max_turn_rate_deg_s: config.max_turn_rate_deg_s,
                    status: "ok".to_string(),
                },
                Err(message) => RunRow {
                    policy: policy.to_string(),
                    beta,
                    f,
                    n_uavs: point.n_uavs,
                    speed_mps: point.speed_mps,
                    seed: job.seed,
                    tc_s: None,
                    tc_censored: None,
                    fairness: None,
                    ncc_mean: None,
                    anc_mean: None,
                    ncc_mean_to_tc: None,
                    anc_mean_to_tc: None,
                    map_width_m: config.grid.width_m(),
                    cell_size_m: config.grid.cell_size_m(),
                    transmission_range_m: config.tx_range_m,
                    evaporation_rate: config.evaporation_rate,
                    diffusion_rate: config.diffusion_rate,
                    boundary_pheromone: config.boundary_pheromone,
                    sim_time_s: config.sim_time_s,
                    decision_interval_s: config.decision_interval_s,
                    hello_period_s: config.hello_period_s,
                    metric_sample_period_s: config.metric_sample_period_s,
                    dt_s: config.dt_s,
                    coverage_target: config.coverage_target,
                    max_turn_rate_deg_s: config.max_turn_rate_deg_s,
                    status: format!("failed: {message}"),
                },
            };
            writer.serialize(row)?;
        }
        Ok(())
    })
}

fn write_summary(
    spec: &ExperimentSpec,
    jobs: &[Job],
    outcomes: &[Result<RunResult, String>],
    path: &Path,
) -> Result<(), ExecuteError> {
    write_atomic(path, |writer| {
        for (point_index, point) in spec.points.iter().enumerate() {
            let results: Vec<&RunResult> = jobs
                .iter()
                .zip(outcomes)
                .filter(|(job, _)| job.point_index == point_index)
                .filter_map(|(_, outcome)| outcome.as_ref().ok())
                .collect();
            let failed = spec.runs_per_point - results.len();
            if results.is_empty() {
                continue;
            }
            let stat = |f: &dyn Fn(&RunResult) -> f64| {
                mean_sem(&results.iter().map(|r| f(r)).collect::<Vec<f64>>())
            };
            let tc = stat(&|r| r.tc_s);
            let fairness = stat(&|r| r.fairness);
            let ncc = stat(&|r| r.ncc_mean);
            let anc = stat(&|r| r.anc_mean);
            let ncc_tc = stat(&|r| r.ncc_mean_to_tc);
            let anc_tc = stat(&|r| r.anc_mean_to_tc);
            let (policy, beta, f) = policy_columns(point.policy);
            writer.serialize(SummaryRow {
                policy: policy.to_string(),
                beta,
                f,
                n_uavs: point.n_uavs,
                speed_mps: point.speed_mps,
                runs: results.len(),
                failed,
                tc_s: tc.mean,
                tc_s_sem: tc.sem,
                tc_censored_runs: results.iter().filter(|r| r.tc_censored).count(),
                fairness: fairness.mean,
                fairness_sem: fairness.sem,
                ncc_mean: ncc.mean,
                ncc_mean_sem: ncc.sem,
                anc_mean: anc.mean,
                anc_mean_sem: anc.sem,
                ncc_mean_to_tc: ncc_tc.mean,
                ncc_mean_to_tc_sem: ncc_tc.sem,
                anc_mean_to_tc: anc_tc.mean,
                anc_mean_to_tc_sem: anc_tc.sem,
            })?;
        }
        Ok(())
    })
}

fn write_timeseries(
    spec: &ExperimentSpec,
    jobs: &[Job],
    outcomes: &[Result<RunResult, String>],
    path: &Path,
) -> Result<(), ExecuteError> {
    write_atomic(path, |writer| {
        for (job, outcome) in jobs.iter().zip(outcomes) {
            let Ok(result) = outcome else { continue };
            let point = &spec.points[job.point_index];
            let (policy, beta, f) = policy_columns(point.policy);
            for sample in &result.samples {
                writer.serialize(SampleRow {
                    policy: policy.to_string(),
                    beta,
                    f,
                    n_uavs: point.n_uavs,
                    speed_mps: point.speed_mps,
                    seed: job.seed,
                    t_s: sample.t_s,
                    ncc: sample.ncc,
                    anc: sample.anc,
                    covered_fraction: sample.covered_fraction,
                })?;
            }
        }
        Ok(())
    })
}
