use std::path::PathBuf;
use std::process::ExitCode;

use bilevel_core::experiment::{
    exit_code_for, preset, run_experiment, ExperimentConfig, Overrides, Role, RunReport, SolverKind, EXIT_CONFIG, PRESETS,
};
use bilevel_core::{ErrorBound, PenaltyPlan};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bilevel", version, about = "Penalty-based solvers for simple bilevel problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment from a config file or a preset.
    Run(RunArgs),
    /// Print a preset as TOML, or list the presets.
    Preset { name: Option<String> },
    /// Print the penalty plan for the given constants.
    Plan(PlanArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// `lrp`, `lsrp`, or a LIBSVM file path.
    #[arg(long)]
    problem: Option<String>,
    /// Replaces the solver list; repeat for several.
    #[arg(long = "solver")]
    solvers: Vec<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lf: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step_tol: Option<f64>,
    /// Zero all times so that repeated runs write identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long)]
    lf: f64,
}

fn load(args: &RunArgs) -> bilevel_core::Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    let solvers = args
        .solvers
        .iter()
        .map(|s| s.parse::<SolverKind>())
        .collect::<bilevel_core::Result<Vec<_>>>()?;
    config.apply(&Overrides {
        problem: args.problem.clone(),
        solvers,
        gamma: args.gamma,
        epsilon: args.epsilon,
        beta: args.beta,
        alpha: args.alpha,
        rho: args.rho,
        lf: args.lf,
        seed: args.seed,
        out_dir: args.out_dir.clone(),
        max_iters: args.max_iters,
        step_tol: args.step_tol,
    })?;
    if args.no_timing {
        config.output.timing = false;
    }
    Ok(config)
}

fn print_report(report: &RunReport) {
    println!(
        "G* = {:.10e}   F* = {}   gamma = {:e}",
        report.g_star(),
        report.f_star().map_or("n/a".into(), |f| format!("{f:.10e}")),
        report.gamma
    );
    println!(
        "{:<14} {:>12} {:>12} {:>14} {:>12} {:>10} {:>9}  certified",
        "method", "G_gap", "F_gap", "F_value", "time_s", "iters", "role"
    );
    for run in &report.runs {
        let role = if run.role == Role::Baseline { "baseline" } else { "solver" };
        match &run.summary {
            Some(s) => println!(
                "{:<14} {:>12.3e} {:>12} {:>14.8} {:>12.4} {:>10} {:>9}  {}",
                run.solver.name(),
                s.lower_gap,
                s.upper_gap.map_or("n/a".into(), |g| format!("{g:.3e}")),
                s.upper_value,
                s.elapsed_s,
                s.iterations,
                role,
                s.certificate.passed()
            ),
            None => println!(
                "{:<14} error: {}",
                run.solver.name(),
                run.error.as_deref().unwrap_or_default()
            ),
        }
    }
    println!("outputs in {}", report.config.output.dir.display());
}

fn run(args: RunArgs) -> u8 {
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG as u8;
        }
    };
    match run_experiment(&config) {
        Ok(report) => {
            print_report(&report);
            report.exit_code() as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e) as u8
        }
    }
}

fn plan(args: PlanArgs) -> u8 {
    let result = ErrorBound::new(args.alpha, args.rho).and_then(|eb| PenaltyPlan::new(eb, args.lf, args.epsilon, args.beta));
    match result {
        Ok(p) => {
            println!("gamma_star            {:e}", p.gamma_star);
            println!("gamma                 {:e}", p.gamma);
            println!("F gap at most         {:e}", p.guaranteed_upper_gap);
            println!("G gap at most         {:e}", p.guaranteed_lower_gap);
            println!("F gap at least        {:e}", p.lower_bound_f);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG as u8
        }
    }
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Plan(args) => plan(args),
        Command::Preset { name: None } => {
            PRESETS.iter().for_each(|p| println!("{p}"));
            0
        }
        Command::Preset { name: Some(name) } => match preset(&name) {
            Ok(c) => {
                print!("{}", c.to_toml_string());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG as u8
            }
        },
    };
    ExitCode::from(code)
}
