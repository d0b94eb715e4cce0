use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProblemConfig, SolverKind, SubgradScheduleKind, UpperReference};
use crate::adaptive::{run_ladder, Engine, LadderConfig, LadderResult};
use crate::apg::{pb_apg, pb_apg_sc, ApgConfig, SolveResult, Termination};
use crate::data::{augment_collinear, instance_from_dataset, minmax_scale, read_libsvm, synth_instance, Family, ParseOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{assemble_penalized, BilevelInstance, ErrorBound, NonsmoothKind, NonsmoothTerm, PenalizedObjective};
use crate::penalty::{certify, Certificate, PenaltyPlan};
use crate::reference::{lower_opt_value, upper_opt_value_dual, upper_opt_value_with, EscalationConfig, ReferenceReport};
use crate::subgrad::{subgrad_solve, subgradient_oracle, Domain, StepSchedule, SubgradConfig};

/// Header of every per-solver trace file.
pub const TRACE_HEADER: [&str; 7] = ["iter", "elapsed_s", "F_value", "G_gap", "step_norm", "gamma", "eps_stage"];

/// Header of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 17] = [
    "method",
    "role",
    "status",
    "G_value",
    "G_gap",
    "F_value",
    "F_gap",
    "gamma",
    "iterations",
    "elapsed_s",
    "termination",
    "G_gap_target",
    "F_gap_lower_bound",
    "F_gap_target",
    "lower_pass",
    "upper_pass",
    "certified",
];

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Exit code for an experiment that failed before producing a report.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Config { .. } | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Solver,
    Baseline,
}

/// One row of a trace file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub elapsed_s: f64,
    pub f_value: f64,
    pub g_gap: f64,
    pub step_norm: f64,
    pub gamma: f64,
    pub eps_stage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub index: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub upper_value: f64,
    pub lower_gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub upper_value: f64,
    pub lower_value: f64,
    pub upper_gap: Option<f64>,
    pub lower_gap: f64,
    /// Penalty of the final iterate.
    pub gamma: f64,
    pub iterations: usize,
    pub elapsed_s: f64,
    pub termination: Termination,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverRun {
    pub solver: SolverKind,
    pub role: Role,
    /// Set when the solver failed; the other fields are then empty.
    pub error: Option<String>,
    pub summary: Option<RunSummary>,
    pub stages: Vec<StageSummary>,
    pub trace: Vec<TracePoint>,
    #[serde(skip)]
    pub x: Option<Array1<f64>>,
}

impl SolverRun {
    pub fn certified(&self) -> bool {
        self.summary.as_ref().is_some_and(|s| s.certificate.passed())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub rows: usize,
    pub dim: usize,
    pub alpha: f64,
    pub rho: f64,
    pub l_f: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub instance: InstanceInfo,
    pub plan: PenaltyPlan,
    pub gamma: f64,
    pub lower_reference: ReferenceReport,
    pub upper_reference: Option<ReferenceReport>,
    pub runs: Vec<SolverRun>,
    pub reference_elapsed_s: f64,
    pub total_elapsed_s: f64,
}

impl RunReport {
    pub fn g_star(&self) -> f64 {
        self.lower_reference.g_star
    }

    pub fn f_star(&self) -> Option<f64> {
        self.upper_reference.as_ref().and_then(|r| r.f_star)
    }

    /// `3` if a primary solver failed, `1` if one missed its certificate,
    /// `0` otherwise. Baselines never affect the code.
    pub fn exit_code(&self) -> i32 {
        let primary = || self.runs.iter().filter(|r| r.role == Role::Solver);
        if primary().any(|r| r.error.is_some()) {
            EXIT_SOLVER
        } else if primary().all(SolverRun::certified) {
            EXIT_PASS
        } else {
            EXIT_CERTIFICATE
        }
    }
}

/// Builds the instance described by `problem`; returns it with its row count.
pub fn load_instance(problem: &ProblemConfig) -> Result<(BilevelInstance, usize)> {
    match problem {
        ProblemConfig::Synthetic { family, rows, cols, seed } => {
            let (instance, data) = synth_instance(*family, *rows, *cols, *seed)?;
            Ok((instance, data.rows))
        }
        ProblemConfig::Libsvm {
            family,
            path,
            n_features,
            max_rows,
            minmax,
            collinear_copies,
            intercept,
        } => {
            let options = ParseOptions {
                n_features: *n_features,
                coerce_pm1: *family == Family::Lrp,
            };
            let mut data = read_libsvm(path, options)?;
            if let Some(m) = *max_rows {
                data.features.truncate(m);
                data.labels.truncate(m);
                data.rows = data.labels.len();
            }
            if data.rows == 0 {
                return Err(Error::config("problem.path", "the dataset has no rows"));
            }
            if *minmax {
                data = minmax_scale(&data);
            }
            let data = augment_collinear(&data, *collinear_copies, *intercept)
                .map_err(|e| Error::config("problem.collinear_copies", e.to_string()))?;
            Ok((instance_from_dataset(*family, &data)?, data.rows))
        }
    }
}

fn penalty_plan(config: &ExperimentConfig, instance: &mut BilevelInstance) -> Result<PenaltyPlan> {
    let p = &config.penalty;
    let eb = ErrorBound::new(
        p.alpha.unwrap_or(instance.error_bound.alpha),
        p.rho.unwrap_or(instance.error_bound.rho),
    )
    .map_err(|e| Error::config("penalty", e.to_string()))?;
    instance.error_bound = eb;
    instance.subgrad_diameter = p.lf.unwrap_or(instance.subgrad_diameter);
    PenaltyPlan::for_instance(instance, p.epsilon, p.beta).map_err(|e| Error::config("penalty", e.to_string()))
}

fn upper_reference(config: &ExperimentConfig, instance: &BilevelInstance, g_star: f64) -> Result<Option<ReferenceReport>> {
    let r = &config.reference;
    let escalate = || upper_opt_value_with(instance, g_star, r.relaxation, &EscalationConfig::default());
    let supports_dual = instance.g1.least_squares_data().is_some()
        && instance.g2.is_zero()
        && instance.f1.ridge_weight().is_some_and(|t| t > 0.0);
    match r.upper {
        UpperReference::None => Ok(None),
        UpperReference::Escalation => escalate().map(Some),
        UpperReference::Dual => upper_opt_value_dual(instance, r.dual_tolerance).map(Some),
        UpperReference::Auto if supports_dual => upper_opt_value_dual(instance, r.dual_tolerance).map(Some),
        UpperReference::Auto => escalate().map(Some),
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    instance: &'a BilevelInstance,
    plan: &'a PenaltyPlan,
    gamma: f64,
    f_star: Option<f64>,
    /// Reference point used to size the subgradient schedule.
    anchor: ArrayView1<'a, f64>,
}

struct Outcome {
    x: Array1<f64>,
    gamma: f64,
    iterations: usize,
    elapsed_s: f64,
    termination: Termination,
    trace: Vec<TracePoint>,
    stages: Vec<StageSummary>,
}

fn timed(timing: bool, seconds: f64) -> f64 {
    if timing {
        seconds
    } else {
        0.0
    }
}

fn single_stage(out: SolveResult, gamma: f64, epsilon: f64, timing: bool) -> Outcome {
    let trace: Vec<TracePoint> = out
        .trace
        .records
        .iter()
        .map(|r| TracePoint {
            iter: r.iteration,
            elapsed_s: timed(timing, r.elapsed_s),
            f_value: r.upper_value,
            g_gap: r.lower_residual.unwrap_or(f64::NAN),
            step_norm: r.step_norm,
            gamma,
            eps_stage: epsilon,
        })
        .collect();
    Outcome {
        x: out.x,
        gamma,
        iterations: out.trace.iterations,
        elapsed_s: trace.last().map_or(0.0, |p| p.elapsed_s),
        termination: out.trace.termination,
        trace,
        stages: Vec::new(),
    }
}

fn ladder_outcome(out: LadderResult, timing: bool) -> Outcome {
    let trace: Vec<TracePoint> = out
        .flattened()
        .into_iter()
        .map(|l| TracePoint {
            iter: l.record.iteration,
            elapsed_s: timed(timing, l.record.elapsed_s),
            f_value: l.record.upper_value,
            g_gap: l.record.lower_residual.unwrap_or(f64::NAN),
            step_norm: l.record.step_norm,
            gamma: l.gamma,
            eps_stage: l.epsilon,
        })
        .collect();
    let stages = out
        .stages
        .iter()
        .map(|s| StageSummary {
            index: s.index,
            gamma: s.gamma,
            epsilon: s.epsilon,
            upper_value: s.upper_value,
            lower_gap: s.lower_residual.unwrap_or(f64::NAN),
            iterations: s.trace.iterations,
        })
        .collect();
    Outcome {
        gamma: out.final_gamma(),
        iterations: out.total_iterations(),
        elapsed_s: trace.last().map_or(0.0, |p| p.elapsed_s),
        termination: out.stages.last().map_or(Termination::MaxIters, |s| s.trace.termination),
        x: out.x,
        trace,
        stages,
    }
}

/// Bound on `||∇φ|| + ||∂ψ||` over the ball of radius `r` around the
/// reference point: `||∇φ(x_ref)|| + L_γ·r` plus a subgradient bound of
/// each nonsmooth term. Indicators contribute nothing since the method
/// projects onto them.
fn subgradient_bound(objective: &PenalizedObjective, ctx: &Context, r: f64) -> Result<f64> {
    let n = ctx.instance.dim as f64;
    let reach = linalg::norm(ctx.anchor) + r;
    let term_bound = |term: &NonsmoothTerm| -> Result<f64> {
        if let Some(l) = term.lipschitz {
            return Ok(l);
        }
        Ok(match &term.kind {
            NonsmoothKind::Zero | NonsmoothKind::L1Ball { .. } | NonsmoothKind::Box { .. } => 0.0,
            NonsmoothKind::L1Norm { weight } => weight * n.sqrt(),
            NonsmoothKind::ElasticNet { l1, l2 } => l1 * n.sqrt() + l2 * reach,
            NonsmoothKind::MaxAffine { slopes, .. } => slopes
                .rows()
                .into_iter()
                .map(|row| linalg::norm(row))
                .fold(0.0, f64::max),
            NonsmoothKind::Custom(_) if term.is_indicator() => 0.0,
            NonsmoothKind::Custom(_) => linalg::norm(subgradient_oracle(term, ctx.anchor)?.view()),
        })
    };
    let smooth = linalg::norm(objective.gradient(ctx.anchor).view()) + objective.lipschitz() * r;
    let bound = smooth + term_bound(&ctx.instance.f2)? + ctx.gamma * term_bound(&ctx.instance.g2)?;
    Ok(bound.max(f64::MIN_POSITIVE))
}

fn run_subgrad(ctx: &Context, time_limit: Option<f64>) -> Result<Outcome> {
    let settings = &ctx.config.subgrad;
    let domain = Domain::from_terms(&[&ctx.instance.f2, &ctx.instance.g2])?;
    let x0 = domain.project(Array1::zeros(ctx.instance.dim).view());
    let objective = assemble_penalized(ctx.instance, ctx.gamma)?;
    let distance = linalg::distance(x0.view(), ctx.anchor);
    let radius = settings.radius.unwrap_or(if distance > 0.0 { distance } else { 1.0 });
    let l_gamma = match settings.l_gamma {
        Some(l) => l,
        None => subgradient_bound(&objective, ctx, radius)?,
    };
    let schedule = match settings.schedule {
        SubgradScheduleKind::Diminishing => StepSchedule::Diminishing { radius },
        SubgradScheduleKind::StronglyConvex => StepSchedule::StronglyConvex {
            mu: objective.strong_convexity(),
        },
    };
    let config = SubgradConfig {
        time_limit,
        record_every: settings.record_every,
        ..SubgradConfig::new(schedule, settings.max_iters, domain)
    };
    let out = subgrad_solve(&objective.with_l_gamma(l_gamma), x0.view(), &config)?;
    Ok(single_stage(out, ctx.gamma, ctx.config.penalty.epsilon, ctx.config.output.timing))
}

fn run_solver(ctx: &Context, solver: SolverKind, subgrad_time: Option<f64>) -> Result<Outcome> {
    let config = ctx.config;
    let timing = config.output.timing;
    let x0 = Array1::zeros(ctx.instance.dim);
    let apg: &ApgConfig = &config.apg;
    let ladder = |engine| -> Result<Outcome> {
        let ladder = LadderConfig { engine, ..config.ladder.clone() };
        Ok(ladder_outcome(run_ladder(ctx.instance, x0.view(), &ladder, apg)?, timing))
    };
    match solver {
        SolverKind::PbApg => {
            let objective = assemble_penalized(ctx.instance, ctx.gamma)?;
            Ok(single_stage(pb_apg(&objective, x0.view(), apg)?, ctx.gamma, apg.epsilon, timing))
        }
        SolverKind::PbApgSc => {
            let objective = assemble_penalized(ctx.instance, ctx.gamma)?;
            let mu = objective.strong_convexity();
            Ok(single_stage(pb_apg_sc(&objective, mu, x0.view(), apg)?, ctx.gamma, apg.epsilon, timing))
        }
        SolverKind::ApbApg => ladder(Engine::Apg),
        SolverKind::ApbApgSc => ladder(Engine::ApgSc),
        SolverKind::Subgrad => run_subgrad(ctx, subgrad_time),
    }
}

fn finish_run(ctx: &Context, solver: SolverKind, role: Role, result: Result<Outcome>) -> SolverRun {
    let summarize = |out: &Outcome| -> Result<RunSummary> {
        let certificate = certify(ctx.instance, out.x.view(), ctx.plan, ctx.f_star)?;
        Ok(RunSummary {
            upper_value: ctx.instance.upper_value(out.x.view()),
            lower_value: ctx.instance.lower_value(out.x.view()),
            upper_gap: certificate.upper_gap,
            lower_gap: certificate.lower_gap,
            gamma: out.gamma,
            iterations: out.iterations,
            elapsed_s: out.elapsed_s,
            termination: out.termination,
            certificate,
        })
    };
    let failed = |e: Error| SolverRun {
        solver,
        role,
        error: Some(e.to_string()),
        summary: None,
        stages: Vec::new(),
        trace: Vec::new(),
        x: None,
    };
    match result.and_then(|out| summarize(&out).map(|s| (out, s))) {
        Ok((out, summary)) => SolverRun {
            solver,
            role,
            error: None,
            summary: Some(summary),
            stages: out.stages,
            trace: out.trace,
            x: Some(out.x),
        },
        Err(e) => failed(e),
    }
}

/// Validates `config`, computes `G*` and `F*`, runs every solver and then
/// every baseline, and writes all output files. Solver failures are recorded
/// in the report; errors returned here are configuration, reference or I/O
/// failures.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let timing = config.output.timing;
    let (mut instance, rows) = load_instance(&config.problem)?;
    let plan = penalty_plan(config, &mut instance)?;
    let gamma = config.penalty.gamma.unwrap_or(plan.gamma);

    let lower_reference = lower_opt_value(&instance, config.reference.lower_tolerance)?;
    let instance = instance.with_lower_opt_value(lower_reference.g_star);
    let upper_reference = upper_reference(config, &instance, lower_reference.g_star)?;
    let reference_elapsed_s = timed(timing, started.elapsed().as_secs_f64());

    let anchor = upper_reference.as_ref().map_or(&lower_reference.point, |r| &r.point);
    let ctx = Context {
        config,
        instance: &instance,
        plan: &plan,
        gamma,
        f_star: upper_reference.as_ref().and_then(|r| r.f_star),
        anchor: anchor.view(),
    };
    let explicit_limit = if timing { config.subgrad.time_limit } else { None };
    let mut runs: Vec<SolverRun> = Vec::new();
    for &solver in &config.solvers {
        runs.push(finish_run(&ctx, solver, Role::Solver, run_solver(&ctx, solver, explicit_limit)));
    }
    let slowest = runs
        .iter()
        .filter_map(|r| r.summary.as_ref().map(|s| s.elapsed_s))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
    let baseline_limit = match (timing && config.subgrad.match_time, slowest) {
        (true, Some(t)) => Some(explicit_limit.map_or(t, |e| e.min(t))),
        _ => explicit_limit,
    };
    for &solver in &config.baselines {
        runs.push(finish_run(&ctx, solver, Role::Baseline, run_solver(&ctx, solver, baseline_limit)));
    }

    let report = RunReport {
        config: config.clone(),
        instance: InstanceInfo {
            rows,
            dim: instance.dim,
            alpha: instance.error_bound.alpha,
            rho: instance.error_bound.rho,
            l_f: instance.subgrad_diameter,
        },
        plan,
        gamma,
        lower_reference,
        upper_reference,
        runs,
        reference_elapsed_s,
        total_elapsed_s: timed(timing, started.elapsed().as_secs_f64()),
    };
    write_outputs(&report, &config.output.dir)?;
    Ok(report)
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn run_stem(run: &SolverRun) -> String {
    match run.role {
        Role::Solver => run.solver.name().to_string(),
        Role::Baseline => format!("baseline_{}", run.solver.name()),
    }
}

fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for p in trace {
        w.write_record([
            p.iter.to_string(),
            sci(p.elapsed_s),
            sci(p.f_value),
            sci(p.g_gap),
            sci(p.step_norm),
            sci(p.gamma),
            sci(p.eps_stage),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_series(path: &Path, points: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (x, y) in points {
        writeln!(w, "{} {}", sci(x), sci(y))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an iterate one coordinate per line.
pub fn write_vector(path: &Path, x: ArrayView1<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in x {
        writeln!(w, "{}", sci(*v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("`{l}` is not a number"),
            })
        })
        .collect::<Result<Vec<f64>>>()
        .map(Array1::from)
}

fn write_summary(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for run in &report.runs {
        let role = match run.role {
            Role::Solver => "solver",
            Role::Baseline => "baseline",
        };
        let mut row = vec![run.solver.name().to_string(), role.to_string()];
        match &run.summary {
            Some(s) => {
                let c = &s.certificate;
                let termination = serde_json::to_value(s.termination)?;
                row.extend([
                    "ok".to_string(),
                    sci(s.lower_value),
                    sci(s.lower_gap),
                    sci(s.upper_value),
                    opt_sci(s.upper_gap),
                    sci(s.gamma),
                    s.iterations.to_string(),
                    sci(s.elapsed_s),
                    termination.as_str().unwrap_or_default().to_string(),
                    sci(c.target_lower),
                    sci(c.lower_bound_f),
                    sci(c.target_upper),
                    c.lower_pass.to_string(),
                    c.upper_pass.map(|p| p.to_string()).unwrap_or_default(),
                    c.passed().to_string(),
                ]);
            }
            None => {
                row.push("error".to_string());
                row.extend(std::iter::repeat(String::new()).take(SUMMARY_HEADER.len() - 4));
                row.push("false".to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Maps a trace point to one plot's `(x, y)`.
type Coordinates = Box<dyn Fn(&TracePoint) -> (f64, f64)>;

fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in &report.runs {
        let stem = run_stem(run);
        if run.error.is_some() {
            continue;
        }
        write_trace(&dir.join(format!("{stem}.csv")), &run.trace)?;
        if let Some(x) = &run.x {
            write_vector(&dir.join(format!("{stem}_x.txt")), x.view())?;
        }
        if report.config.output.plots {
            let t = &run.trace;
            let series: [(&str, Coordinates); 4] = [
                ("F_value_iter", Box::new(|p| (p.iter as f64, p.f_value))),
                ("G_gap_iter", Box::new(|p| (p.iter as f64, p.g_gap))),
                ("F_value_time", Box::new(|p| (p.elapsed_s, p.f_value))),
                ("G_gap_time", Box::new(|p| (p.elapsed_s, p.g_gap))),
            ];
            for (name, f) in series {
                write_series(&dir.join(format!("{stem}_{name}.dat")), t.iter().map(&f))?;
            }
        }
    }
    write_summary(&dir.join("summary.csv"), report)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}
