//! `starflow`: run star-shaped mean curvature flow experiments, classify
//! blowups, solve the regularized arrival-time problem, and evaluate the
//! property report over stored artifacts.

use clap::{Args, Parser, Subcommand};
use starflow::arrival::{self, ArrivalProblem, DEFAULT_EPS_LADDER};
use starflow::config;
use starflow::report::{self, Status};
use starflow::rescaling;
use starflow::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "starflow", version, about = "mean curvature flow lab for star-shaped hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write all artifacts.
    Run(RunArgs),
    /// Classify the tangent flow of a finished run.
    Blowup(BlowupArgs),
    /// Solve the regularized arrival-time problem in sphere mode.
    Arrival(ArrivalArgs),
    /// Evaluate the property report over a run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Thread count for parallel sections; results are identical for any
    /// value.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BlowupArgs {
    /// Run directory with events.json and checkpoints/.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ArrivalArgs {
    #[arg(long = "R0", default_value_t = 1.0)]
    r0: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long = "M", default_value_t = 1024)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
    /// Solve the whole default epsilon ladder and emit arrival_study.csv.
    #[arg(long)]
    study: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run_cli(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run_cli(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run(args) => {
            let cfg = config::parse_config(&args.config).map_err(|e| e.to_string())?;
            let out = args
                .out
                .clone()
                .or_else(|| cfg.out_dir.clone())
                .ok_or("no output directory: pass --out or set out_dir in the config")?;
            let arts = runner::run_experiment(&cfg, &out, args.threads).map_err(|e| e.to_string())?;
            eprintln!(
                "run `{}`: {} steps, terminal {:?}, {} records, {} checkpoints",
                cfg.name,
                arts.events.steps,
                arts.events.terminal_event,
                arts.records.len(),
                arts.trajectory.checkpoints.len()
            );
            if let Some(est) = arts.events.t0_estimate {
                eprintln!("singular time estimate t0 = {} (residual {:.3e})", est.t0, est.residual);
            }
            let rep = report::evaluate_properties(&out).map_err(|e| e.to_string())?;
            print_report(&rep);
            Ok(exit_for(&rep))
        }
        Command::Blowup(args) => {
            let events = runner::load_events(&args.run).map_err(|e| e.to_string())?;
            let est = events
                .t0_estimate
                .ok_or("run has no singular-time estimate; nothing to classify")?;
            let traj = runner::load_trajectory(&args.run).map_err(|e| e.to_string())?;
            let rep = rescaling::classify_tangent_flow(&traj, est.t0, est.residual)
                .map_err(|e| e.to_string())?;
            let text = serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?;
            std::fs::write(&args.out, text).map_err(|e| e.to_string())?;
            eprintln!(
                "classification {:?} with residual {:.3e} at t0 = {}",
                rep.classification, rep.residual, rep.t0
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Arrival(args) => {
            let problem =
                ArrivalProblem { r0: args.r0, dim: args.n, sigma: args.sigma, eps: args.eps, m: args.m };
            let sol = arrival::solve_arrival(&problem).map_err(|e| e.to_string())?;
            eprintln!(
                "solved in {} Newton iterations: v(0) = {:.6}, max |Dv| = {:.6}, translator defect {:.3e}",
                sol.newton_iters, sol.v[0], sol.max_grad, sol.translator_defect
            );
            let text = serde_json::to_string_pretty(&sol).map_err(|e| e.to_string())?;
            std::fs::write(&args.out, text).map_err(|e| e.to_string())?;
            if args.study {
                let table = arrival::convergence_study(&problem, &DEFAULT_EPS_LADDER)
                    .map_err(|e| e.to_string())?;
                let path = args.out.with_file_name("arrival_study.csv");
                std::fs::write(&path, runner::study_to_csv(&table)).map_err(|e| e.to_string())?;
                eprintln!("study written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let rep = report::evaluate_properties(&args.run).map_err(|e| e.to_string())?;
            print_report(&rep);
            if let Some(out) = args.out {
                let text = serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?;
                std::fs::write(&out, text).map_err(|e| e.to_string())?;
            }
            Ok(exit_for(&rep))
        }
    }
}

fn print_report(rep: &report::PropertyReport) {
    for p in &rep.properties {
        let status = match p.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        let measured = p
            .measured
            .map(|m| format!(" measured={m:.6e}"))
            .unwrap_or_default();
        let tol = p
            .tolerance
            .map(|t| format!(" tol={t:.3e}"))
            .unwrap_or_default();
        println!("{status} {}{measured}{tol} | {}", p.name, p.anchor);
    }
    println!("{} pass, {} fail, {} skip", rep.n_pass, rep.n_fail, rep.n_skip);
}

fn exit_for(rep: &report::PropertyReport) -> ExitCode {
    if rep.has_failures() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
