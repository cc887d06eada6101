//! Experiment orchestration and deterministic serialization of all run
//! artifacts.
//!
//! A run directory holds:
//! - `monitors.csv`: one row per monitor record, fixed column set;
//! - `checkpoints/ckpt_<k>.csv`: graph snapshots on the blowup cadence;
//! - `events.json`: config echo, effective limits, terminal event, the
//!   singular-time estimate, and stage outcomes;
//! - `blowup.json`: the tangent-flow report, when a blowup window exists;
//! - `arrival.json` and `arrival_study.csv`: the elliptic-regularization
//!   stage for sphere fixtures;
//! - `report.json`: the property report evaluated over the artifacts.

use crate::arrival::{self, ArrivalProblem, ArrivalSolution, StudyTable};
use crate::config::{ConfigError, ExperimentConfig};
use crate::flow::{self, Checkpoint, EffectiveLimits, InitialSummary, SingularTimeEstimate, TerminalEvent, Trajectory};
use crate::geometry::{self, fmt_float, ShapeSpec};
use crate::monitors::{self, MonitorParams, StarMonitorRecord};
use crate::rescaling::{self, RescaleError, TangentFlowReport};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Monitor(#[from] monitors::MonitorError),
    #[error(transparent)]
    Rescale(#[from] RescaleError),
    #[error(transparent)]
    Arrival(#[from] arrival::ArrivalError),
    #[error("MISSING_ARTIFACT: {0}")]
    MissingArtifact(PathBuf),
    #[error("artifact {path}: {msg}")]
    Artifact { path: PathBuf, msg: String },
    #[error("io error on {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

fn io_err(path: &Path, e: std::io::Error) -> RunnerError {
    RunnerError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OneSidedOutcome {
    Pass,
    Fail,
    NotEnclosing,
    Overflow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneSidedEntry {
    pub radius: f64,
    pub outcome: OneSidedOutcome,
}

/// Everything events.json records about a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventsFile {
    pub name: String,
    pub config: ExperimentConfig,
    pub effective: EffectiveLimits,
    pub initial: InitialSummary,
    pub terminal_event: TerminalEvent,
    pub steps: u64,
    pub min_f_over_run: f64,
    pub t0_estimate: Option<SingularTimeEstimate>,
    /// Start of the rescaled window; first checkpoint after ten steps
    /// unless configured.
    pub sigma_used: Option<f64>,
    /// Time of the slice used for the weighted one-sided comparison.
    pub one_sided_slice_t: Option<f64>,
    pub one_sided: Option<Vec<OneSidedEntry>>,
    pub checkpoint_steps: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalArtifact {
    pub template: ArrivalProblem,
    pub study: StudyTable,
    /// Solution at the smallest epsilon of the ladder.
    pub solution: ArrivalSolution,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub events: EventsFile,
    pub records: Vec<StarMonitorRecord>,
    pub trajectory: Trajectory,
    pub blowup: Option<TangentFlowReport>,
    pub arrival: Option<ArrivalArtifact>,
}

/// Run the full experiment pipeline and write every artifact under `out`.
/// With `threads` given, all parallel sections run inside a dedicated
/// rayon pool of that size; results are identical for any thread count.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<RunArtifacts, RunnerError> {
    cfg.validate()?;
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunnerError::Artifact {
                    path: out.to_path_buf(),
                    msg: format!("thread pool: {e}"),
                })?;
            pool.install(|| run_experiment_inner(cfg, out))
        }
        None => run_experiment_inner(cfg, out),
    }
}

fn run_experiment_inner(cfg: &ExperimentConfig, out: &Path) -> Result<RunArtifacts, RunnerError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mon = MonitorParams {
        ladder: cfg.ladder.clone(),
        z_images: cfg.z_images,
        a1: cfg.flow.a1,
        a2: cfg.flow.a2,
    };
    let run = flow::run(&cfg.flow, &mon)?;

    // Rescaled-window start: configured, or the first checkpoint cut at or
    // after ten steps.
    let resc_opts = cfg.rescaling.clone().unwrap_or_default();
    let sigma_used = match resc_opts.sigma {
        Some(s) => Some(s),
        None => run
            .trajectory
            .checkpoints
            .iter()
            .find(|c| c.step >= 10 && c.t > 0.0)
            .map(|c| c.t),
    };

    // Weighted one-sided comparison on the best-resolved rescaled slice:
    // the earliest checkpoint past a configured sigma, otherwise the last
    // positive-time checkpoint.
    let slice = match resc_opts.sigma {
        Some(s) => run.trajectory.checkpoints.iter().find(|c| c.t >= s && c.t > 0.0),
        None => run.trajectory.checkpoints.iter().rev().find(|c| c.t > 0.0),
    };
    let mut one_sided = None;
    let mut one_sided_slice_t = None;
    if let Some(ck) = slice {
        let frame = geometry::compute_frame(&ck.graph)?;
        let rf = rescaling::continuous_rescale(&frame, ck.t)?;
        let max_norm = rf.max_x_norm();
        let mut radii: Vec<f64> = resc_opts.encloser_factors.iter().map(|f| f * max_norm).collect();
        radii.extend_from_slice(&resc_opts.encloser_radii);
        let mut entries = Vec::with_capacity(radii.len());
        for radius in radii {
            let outcome = match rescaling::one_sided_check(&rf, &[radius]) {
                Ok(res) => {
                    if res[0].1 {
                        OneSidedOutcome::Pass
                    } else {
                        OneSidedOutcome::Fail
                    }
                }
                Err(RescaleError::NotEnclosing { .. }) => OneSidedOutcome::NotEnclosing,
                Err(RescaleError::OverflowGuard(_)) => OneSidedOutcome::Overflow,
                Err(e) => return Err(e.into()),
            };
            entries.push(OneSidedEntry { radius, outcome });
        }
        one_sided = Some(entries);
        one_sided_slice_t = Some(ck.t);
    }

    // Tangent-flow classification when a blowup window exists.
    let blowup = match run.trajectory.t0_estimate {
        Some(est) => {
            match rescaling::classify_tangent_flow(&run.trajectory, est.t0, est.residual) {
                Ok(rep) => Some(rep),
                Err(RescaleError::NoBlowup { .. }) | Err(RescaleError::EmptyWindow(_)) => None,
                Err(e) => return Err(e.into()),
            }
        }
        None => None,
    };

    // Elliptic-regularization stage for sphere fixtures.
    let arrival_art = match (&cfg.arrival, &cfg.flow.shape) {
        (Some(opts), ShapeSpec::Sphere { radius }) => {
            let template = ArrivalProblem {
                r0: *radius,
                dim: cfg.flow.n,
                sigma: opts.sigma,
                eps: opts.eps_ladder[0],
                m: opts.m,
            };
            let study = arrival::convergence_study(&template, &opts.eps_ladder)?;
            let final_problem = ArrivalProblem {
                eps: *opts.eps_ladder.last().expect("nonempty ladder"),
                ..template
            };
            let solution = arrival::solve_arrival(&final_problem)?;
            Some(ArrivalArtifact { template, study, solution })
        }
        _ => None,
    };

    let events = EventsFile {
        name: cfg.name.clone(),
        config: cfg.clone(),
        effective: run.effective,
        initial: run.initial,
        terminal_event: run.trajectory.terminal,
        steps: run.steps,
        min_f_over_run: run.min_f_over_run,
        t0_estimate: run.trajectory.t0_estimate,
        sigma_used,
        one_sided_slice_t,
        one_sided,
        checkpoint_steps: run.trajectory.checkpoints.iter().map(|c| c.step).collect(),
    };

    write_string(&out.join("monitors.csv"), &monitors::records_to_csv(&run.records))?;
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| io_err(&ckpt_dir, e))?;
    for stale in std::fs::read_dir(&ckpt_dir).map_err(|e| io_err(&ckpt_dir, e))? {
        let stale = stale.map_err(|e| io_err(&ckpt_dir, e))?.path();
        if stale.extension().is_some_and(|e| e == "csv") {
            std::fs::remove_file(&stale).map_err(|e| io_err(&stale, e))?;
        }
    }
    for (k, ck) in run.trajectory.checkpoints.iter().enumerate() {
        let path = ckpt_dir.join(format!("ckpt_{k:04}.csv"));
        write_string(&path, &geometry::graph_to_csv(&ck.graph))?;
    }
    write_json(&out.join("events.json"), &events)?;
    if let Some(rep) = &blowup {
        write_json(&out.join("blowup.json"), rep)?;
    }
    if let Some(art) = &arrival_art {
        write_json(&out.join("arrival.json"), art)?;
        write_string(&out.join("arrival_study.csv"), &study_to_csv(&art.study))?;
    }

    let report = crate::report::evaluate_properties(out)?;
    write_json(&out.join("report.json"), &report)?;

    Ok(RunArtifacts {
        out_dir: out.to_path_buf(),
        events,
        records: run.records,
        trajectory: run.trajectory,
        blowup,
        arrival: arrival_art,
    })
}

pub fn study_to_csv(study: &StudyTable) -> String {
    let mut out = String::from("eps,supError,maxGrad,cLow,cHigh,translatorDefect,Fdefect\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_float(r.eps),
            fmt_float(r.sup_error),
            fmt_float(r.max_grad),
            fmt_float(r.c_low),
            fmt_float(r.c_high),
            fmt_float(r.translator_defect),
            fmt_float(r.f_defect),
        ));
    }
    out
}

fn write_string(path: &Path, text: &str) -> Result<(), RunnerError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunnerError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RunnerError::Artifact { path: path.to_path_buf(), msg: e.to_string() })?;
    write_string(path, &text)
}

pub fn load_events(dir: &Path) -> Result<EventsFile, RunnerError> {
    let path = dir.join("events.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| RunnerError::MissingArtifact(path.clone()))?;
    serde_json::from_str(&text)
        .map_err(|e| RunnerError::Artifact { path, msg: e.to_string() })
}

pub fn load_monitors(dir: &Path) -> Result<Vec<StarMonitorRecord>, RunnerError> {
    let path = dir.join("monitors.csv");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| RunnerError::MissingArtifact(path.clone()))?;
    monitors::records_from_csv(&text)
        .map_err(|e| RunnerError::Artifact { path, msg: e.to_string() })
}

pub fn load_arrival(dir: &Path) -> Result<Option<ArrivalArtifact>, RunnerError> {
    let path = dir.join("arrival.json");
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| RunnerError::Artifact { path, msg: e.to_string() }),
        Err(_) => Ok(None),
    }
}

/// Rebuild the trajectory from checkpoint files; per-checkpoint extremes
/// are recomputed from the stored graphs.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory, RunnerError> {
    let events = load_events(dir)?;
    let ckpt_dir = dir.join("checkpoints");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&ckpt_dir)
        .map_err(|_| RunnerError::MissingArtifact(ckpt_dir.clone()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(RunnerError::MissingArtifact(ckpt_dir));
    }
    let mut checkpoints = Vec::with_capacity(files.len());
    for (k, path) in files.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let graph = geometry::graph_from_csv(&text)
            .map_err(|e| RunnerError::Artifact { path: path.clone(), msg: e.to_string() })?;
        let frame = geometry::compute_frame(&graph)?;
        checkpoints.push(Checkpoint {
            t: graph.t,
            step: events.checkpoint_steps.get(k).copied().unwrap_or(0),
            max_h: frame.max_h(),
            max_abs_a: frame.max_abs_a(),
            min_r: graph.min_r(),
            graph,
        });
    }
    Ok(Trajectory {
        checkpoints,
        terminal: events.terminal_event,
        t0_estimate: events.t0_estimate,
    })
}
