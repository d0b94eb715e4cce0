//! Accelerated proximal gradient engines for the penalized problem.
//!
//! [`pb_apg`] runs the Tseng-style recursion
//!
//! ```text
//! y_k     = x_k + t_k·(1/t_{k−1} − 1)·(x_k − x_{k−1})
//! x_{k+1} = prox_{ψ/L}(y_k − ∇φ(y_k)/L)
//! ```
//!
//! with `t_{−1} = t_0 = 1` and `t_{k+1}` the root of `(1 − t)/t² = 1/t_k²`.
//! After `K` steps `Φ(x_K) − Φ* ≤ 2·L·R²/(K+1)²` whenever `||x_0 − x*|| ≤ R`,
//! which gives the default iteration budget.
//!
//! [`pb_apg_sc`] is the strongly convex variant with constant momentum
//! `(√L − √μ)/(√L + √μ)` and linear rate `((L+μ)/2)·R²·(1 − √(μ/L))^k`.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::PenalizedObjective;

/// Positive root `t` of `(1 − t)/t² = 1/θ²`.
pub fn next_theta(theta: f64) -> f64 {
    // (θ√(θ² + 4) − θ²)/2, rationalized to avoid cancellation for small θ
    2.0 * theta / (theta + (theta * theta + 4.0).sqrt())
}

/// Smallest `K ≥ 0` with `2·L·R²/(K+1)² ≤ ε`.
pub fn iteration_budget(l_gamma: f64, radius: f64, epsilon: f64) -> usize {
    let bound = |k: usize| 2.0 * l_gamma * radius * radius / ((k as f64 + 1.0) * (k as f64 + 1.0));
    if bound(0) <= epsilon {
        return 0;
    }
    let guess = (radius * (2.0 * l_gamma / epsilon).sqrt() - 1.0).ceil().max(0.0);
    if !(guess < (1u64 << 52) as f64) {
        return usize::MAX;
    }
    let mut k = guess as usize;
    while k > 0 && bound(k - 1) <= epsilon {
        k -= 1;
    }
    while bound(k) > epsilon {
        k += 1;
    }
    k
}

/// Smallest `k ≥ 0` with `((L+μ)/2)·R²·(1 − √(μ/L))^k ≤ ε`.
pub fn sc_budget(l_gamma: f64, mu: f64, radius: f64, epsilon: f64) -> Result<usize> {
    if !(mu > 0.0) || mu > l_gamma {
        return Err(Error::InvalidStrongConvexity { mu, lipschitz: l_gamma });
    }
    let initial = 0.5 * (l_gamma + mu) * radius * radius;
    if initial <= epsilon {
        return Ok(0);
    }
    let rate = 1.0 - (mu / l_gamma).sqrt();
    if rate <= 0.0 {
        return Ok(1);
    }
    let bound = |k: usize| initial * rate.powi(k as i32);
    let guess = ((epsilon / initial).ln() / rate.ln()).ceil().max(0.0);
    if !(guess < i32::MAX as f64) {
        return Ok(usize::MAX);
    }
    let mut k = guess as usize;
    while k > 0 && bound(k - 1) <= epsilon {
        k -= 1;
    }
    while bound(k) > epsilon {
        k += 1;
    }
    Ok(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApgConfig {
    /// Hard cap on iterations; the theoretical budget applies when `None`.
    pub max_iters: Option<usize>,
    /// Target accuracy on the penalized objective.
    pub epsilon: f64,
    /// `R ≥ ||x_0 − x*||`; defaults to `||x_0|| + 1`.
    pub radius_bound: Option<f64>,
    /// Stop once `||x_{k+1} − x_k|| ≤ step_tolerance`; `0` disables.
    pub step_tolerance: f64,
    /// Reset momentum whenever the objective increases.
    pub restart: bool,
    pub record_every: usize,
}

impl Default for ApgConfig {
    fn default() -> Self {
        ApgConfig {
            max_iters: None,
            epsilon: 1e-6,
            radius_bound: None,
            step_tolerance: 0.0,
            restart: false,
            record_every: 1,
        }
    }
}

impl ApgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if let Some(r) = self.radius_bound {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("radius bound = {r} must be > 0")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        if !(self.step_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("step_tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    pub(crate) fn radius_for(&self, x0: ArrayView1<f64>) -> f64 {
        self.radius_bound.unwrap_or_else(|| linalg::norm(x0) + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetReached,
    StepTolerance,
    MaxIters,
    TimeLimit,
}

/// Metrics of one recorded iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `F(x_k)`
    pub upper_value: f64,
    /// `G(x_k) − G*`, when `G*` is known.
    pub lower_residual: Option<f64>,
    /// `Φ_γ(x_k)`
    pub penalized_value: f64,
    /// `||x_k − x_{k−1}||`; zero for the initial point.
    pub step_norm: f64,
    pub elapsed_s: f64,
    /// Momentum parameter in effect at this iterate (`t_k`, or the
    /// constant momentum of the strongly convex engine).
    pub momentum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Number of iterations actually performed.
    pub iterations: usize,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Array1<f64>,
    pub trace: SolverTrace,
}

pub(crate) struct Recorder<'a> {
    objective: &'a PenalizedObjective,
    start: Instant,
    every: usize,
    pub(crate) records: Vec<TraceRecord>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(objective: &'a PenalizedObjective, every: usize) -> Self {
        Recorder {
            objective,
            start: Instant::now(),
            every,
            records: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, iteration: usize, x: ArrayView1<f64>, step_norm: f64, momentum: f64) {
        if self.records.last().is_some_and(|r| r.iteration == iteration) {
            return;
        }
        self.records.push(TraceRecord {
            iteration,
            upper_value: self.objective.upper_value(x),
            lower_residual: self.objective.lower_residual(x),
            penalized_value: self.objective.value(x),
            step_norm,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            momentum,
        });
    }

    pub(crate) fn maybe_record(&mut self, iteration: usize, x: ArrayView1<f64>, step_norm: f64, momentum: f64) {
        if iteration % self.every == 0 {
            self.record(iteration, x, step_norm, momentum);
        }
    }

    pub(crate) fn finish(self, termination: Termination, iterations: usize) -> SolverTrace {
        SolverTrace {
            records: self.records,
            termination,
            iterations,
        }
    }

    pub(crate) fn non_finite(mut self, iteration: usize, x: ArrayView1<f64>, momentum: f64) -> Error {
        self.record(iteration, x, f64::NAN, momentum);
        Error::NonFiniteIterate {
            iteration,
            trace: Box::new(self.finish(Termination::MaxIters, iteration)),
        }
    }
}

fn all_finite(x: &Array1<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn check_start(objective: &PenalizedObjective, x0: ArrayView1<f64>) -> Result<()> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("starting point has non-finite entries".into()));
    }
    if !(objective.unscaled_lipschitz() > 0.0) {
        return Err(Error::InvalidArgument("smooth part must have a positive Lipschitz constant".into()));
    }
    Ok(())
}

/// Accelerated proximal gradient on `Φ_γ` with the Tseng momentum sequence.
pub fn pb_apg(objective: &PenalizedObjective, x0: ArrayView1<f64>, config: &ApgConfig) -> Result<SolveResult> {
    config.validate()?;
    check_start(objective, x0)?;
    let psi = objective.require_psi()?;
    let radius = config.radius_for(x0);
    let budget = iteration_budget(objective.lipschitz(), radius, config.epsilon);
    let limit = config.max_iters.map_or(budget, |m| m.min(budget));

    let mut recorder = Recorder::new(objective, config.record_every);
    let mut x = x0.to_owned();
    let mut x_prev = x.clone();
    let (mut theta_prev, mut theta) = (1.0, 1.0);
    let mut value = if config.restart { objective.value(x.view()) } else { 0.0 };
    recorder.record(0, x.view(), 0.0, theta);

    let mut termination = if limit == budget { Termination::BudgetReached } else { Termination::MaxIters };
    let mut performed = 0;
    for k in 0..limit {
        let beta = theta * (1.0 / theta_prev - 1.0);
        let y = if beta == 0.0 { x.clone() } else { &x + &((&x - &x_prev) * beta) };
        let x_next = objective.prox_grad_step(psi, y.view());
        if !all_finite(&x_next) {
            return Err(recorder.non_finite(k + 1, x_next.view(), theta));
        }
        let step = linalg::distance(x_next.view(), x.view());
        theta_prev = theta;
        theta = next_theta(theta);
        if config.restart {
            let next_value = objective.value(x_next.view());
            if next_value > value {
                theta_prev = 1.0;
                theta = 1.0;
            }
            value = next_value;
        }
        x_prev = std::mem::replace(&mut x, x_next);
        performed = k + 1;
        recorder.maybe_record(performed, x.view(), step, theta);
        if config.step_tolerance > 0.0 && step <= config.step_tolerance {
            termination = Termination::StepTolerance;
            break;
        }
    }
    let last_step = linalg::distance(x.view(), x_prev.view());
    recorder.record(performed, x.view(), last_step, theta);
    Ok(SolveResult {
        x,
        trace: recorder.finish(termination, performed),
    })
}

/// Accelerated proximal gradient with constant momentum for `μ`-strongly
/// convex `φ_γ`. Two warm-up steps from `x_init` produce `x_0`:
/// `ỹ = x_init − ∇φ(x_init)/L`, `x_0 = prox_{ψ/L}(ỹ − ∇φ(ỹ)/L)`.
pub fn pb_apg_sc(
    objective: &PenalizedObjective,
    mu: f64,
    x_init: ArrayView1<f64>,
    config: &ApgConfig,
) -> Result<SolveResult> {
    config.validate()?;
    check_start(objective, x_init)?;
    let lipschitz = objective.lipschitz();
    if !(mu > 0.0) || mu > lipschitz {
        return Err(Error::InvalidStrongConvexity { mu, lipschitz });
    }
    let psi = objective.require_psi()?;
    let radius = config.radius_for(x_init);
    let budget = sc_budget(lipschitz, mu, radius, config.epsilon)?;
    let limit = config.max_iters.map_or(budget, |m| m.min(budget));
    let (sl, sm) = (lipschitz.sqrt(), mu.sqrt());
    let momentum = (sl - sm) / (sl + sm);

    let mut recorder = Recorder::new(objective, config.record_every);
    let unscaled = objective.unscaled_lipschitz();
    let mut y_tilde = objective.phi.gradient(x_init);
    y_tilde.mapv_inplace(|g| -g / unscaled);
    y_tilde += &x_init;
    let mut x = objective.prox_grad_step(psi, y_tilde.view());
    if !all_finite(&x) {
        return Err(recorder.non_finite(0, x.view(), momentum));
    }
    let mut x_prev = x.clone();
    let mut value = if config.restart { objective.value(x.view()) } else { 0.0 };
    let mut restarted = false;
    recorder.record(0, x.view(), 0.0, momentum);

    let mut termination = if limit == budget { Termination::BudgetReached } else { Termination::MaxIters };
    let mut performed = 0;
    for k in 0..limit {
        let y = if restarted || momentum == 0.0 {
            x.clone()
        } else {
            &x + &((&x - &x_prev) * momentum)
        };
        let x_next = objective.prox_grad_step(psi, y.view());
        if !all_finite(&x_next) {
            return Err(recorder.non_finite(k + 1, x_next.view(), momentum));
        }
        let step = linalg::distance(x_next.view(), x.view());
        restarted = false;
        if config.restart {
            let next_value = objective.value(x_next.view());
            restarted = next_value > value;
            value = next_value;
        }
        x_prev = std::mem::replace(&mut x, x_next);
        performed = k + 1;
        recorder.maybe_record(performed, x.view(), step, momentum);
        if config.step_tolerance > 0.0 && step <= config.step_tolerance {
            termination = Termination::StepTolerance;
            break;
        }
    }
    let last_step = if performed == 0 { 0.0 } else { linalg::distance(x.view(), x_prev.view()) };
    recorder.record(performed, x.view(), last_step, momentum);
    Ok(SolveResult {
        x,
        trace: recorder.finish(termination, performed),
    })
}

/// `ỹ` and `x_0` of the strongly convex engine's warm-up, exposed so callers
/// can compute the radius `max(||x_init − x*||, ||x_0 − x*||)` the rate bound
/// needs.
pub fn sc_warm_start(objective: &PenalizedObjective, x_init: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let psi = objective.require_psi()?;
    let unscaled = objective.unscaled_lipschitz();
    let mut y_tilde = objective.phi.gradient(x_init);
    y_tilde.mapv_inplace(|g| -g / unscaled);
    y_tilde += &x_init;
    let x0 = objective.prox_grad_step(psi, y_tilde.view());
    Ok((y_tilde, x0))
}
