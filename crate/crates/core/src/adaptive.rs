//! Adaptive penalty ladders with warm start.
//!
//! Stage `k` solves the penalized problem at `γ_k = γ₀·ν^k` to accuracy
//! `ε_k = ε₀/η^k`, starting from the previous stage's output. Once
//! `γ_k ≥ γ*(ε_k)` each stage output is an
//! `(ε_k, 2ε₀/(η^k(γ_k − γ*_k)))`-optimal bilevel solution.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::apg::{pb_apg, pb_apg_sc, ApgConfig, SolverTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{assemble_penalized, BilevelInstance};
use crate::penalty::gamma_star;

/// Relative slack when comparing `ε_k` against the stopping threshold, so
/// that `1e-6/10⁴` counts as reaching `1e-10`.
const STOP_SLACK: f64 = 1e-9;
/// Guard against ladders that can never satisfy their stopping rule.
const MAX_STAGES: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Apg,
    ApgSc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub gamma0: f64,
    /// Penalty multiplier per stage.
    pub nu: f64,
    /// Accuracy divisor per stage.
    pub eta: f64,
    pub epsilon0: f64,
    /// The ladder ends at the first stage with `ε_k ≤ stop_epsilon` (and
    /// `γ_k ≥ final_gamma` when set).
    pub stop_epsilon: f64,
    /// Optional floor on the last stage's penalty. Accuracy targets stop
    /// shrinking at `stop_epsilon` while `γ` keeps growing.
    pub final_gamma: Option<f64>,
    pub engine: Engine,
    /// Run the first two stages at `γ₀` (`γ_k = γ₀·ν^{k−1}` for `k ≥ 1`).
    pub repeat_first_gamma: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            gamma0: 1.0 / 32.0,
            nu: 20.0,
            eta: 10.0,
            epsilon0: 1e-6,
            stop_epsilon: 1e-10,
            final_gamma: None,
            engine: Engine::Apg,
            repeat_first_gamma: false,
        }
    }
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma0", self.gamma0),
            ("epsilon0", self.epsilon0),
            ("stop_epsilon", self.stop_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidLadder(format!("{name} = {v} must be positive and finite")));
            }
        }
        if !(self.nu > 1.0) || !(self.eta > 1.0) {
            return Err(Error::InvalidLadder(format!("need nu > 1 and eta > 1, got nu = {}, eta = {}", self.nu, self.eta)));
        }
        if let Some(g) = self.final_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidLadder(format!("final_gamma = {g} must be positive and finite")));
            }
        }
        Ok(())
    }

    pub fn gamma_at(&self, stage: usize) -> f64 {
        let exponent = if self.repeat_first_gamma { stage.saturating_sub(1) } else { stage };
        self.gamma0 * self.nu.powi(exponent as i32)
    }

    pub fn epsilon_at(&self, stage: usize) -> f64 {
        let eps = self.epsilon0 / self.eta.powi(stage as i32);
        if self.final_gamma.is_some() {
            eps.max(self.stop_epsilon)
        } else {
            eps
        }
    }

    fn is_last(&self, stage: usize) -> bool {
        let eps_done = self.epsilon0 / self.eta.powi(stage as i32) <= self.stop_epsilon * (1.0 + STOP_SLACK);
        let gamma_done = self.final_gamma.map_or(true, |g| self.gamma_at(stage) >= g * (1.0 - STOP_SLACK));
        eps_done && gamma_done
    }
}

/// Smallest `N ≥ 0` with `γ₀·ν^N ≥ γ*(ε₀/η^N)`: the first stage from which
/// the ladder's per-stage guarantee applies.
pub fn ladder_entry_index(
    alpha: f64,
    rho: f64,
    l_f: f64,
    epsilon0: f64,
    gamma0: f64,
    nu: f64,
    eta: f64,
) -> Result<usize> {
    if !(nu > 1.0) || !(eta > 1.0) || !(gamma0 > 0.0) {
        return Err(Error::InvalidLadder(format!("need nu > 1, eta > 1, gamma0 > 0 (nu = {nu}, eta = {eta}, gamma0 = {gamma0})")));
    }
    let (base, target) = if alpha > 1.0 {
        let base = eta.powf(1.0 - alpha) * nu;
        if !(base > 1.0) {
            return Err(Error::InvalidLadder(format!("nu = {nu} must exceed eta^(alpha-1) = {}", eta.powf(alpha - 1.0))));
        }
        (base, gamma_star(alpha, rho, l_f, epsilon0)? / gamma0)
    } else {
        (nu, gamma_star(alpha, rho, l_f, epsilon0)? / gamma0)
    };
    if target <= 1.0 {
        return Ok(0);
    }
    let guess = (target.ln() / base.ln()).ceil().max(0.0);
    let mut n = if guess < MAX_STAGES as f64 { guess as usize } else { MAX_STAGES };
    while n > 0 && base.powi(n as i32 - 1) >= target {
        n -= 1;
    }
    while base.powi(n as i32) < target {
        n += 1;
    }
    Ok(n)
}

/// Stage-`k` lower-level gap guarantee `2ε₀/(η^k(γ₀ν^k − γ*_k))`; infinite
/// before the ladder entry index.
pub fn stage_lower_gap_bound(alpha: f64, rho: f64, l_f: f64, ladder: &LadderConfig, stage: usize) -> Result<f64> {
    let eps_k = ladder.epsilon_at(stage);
    let margin = ladder.gamma_at(stage) - gamma_star(alpha, rho, l_f, eps_k)?;
    Ok(if margin > 0.0 { 2.0 * eps_k / margin } else { f64::INFINITY })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub index: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub upper_value: f64,
    pub lower_residual: Option<f64>,
    pub trace: SolverTrace,
}

#[derive(Clone, Debug)]
pub struct LadderResult {
    pub x: Array1<f64>,
    pub stages: Vec<Stage>,
}

/// One trace record in ladder-global coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderRecord {
    pub record: TraceRecord,
    pub gamma: f64,
    pub epsilon: f64,
}

impl LadderResult {
    pub fn final_gamma(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.gamma)
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.trace.iterations).sum()
    }

    /// Concatenates the stage traces with cumulative iteration counts and
    /// elapsed times. Each stage's initial record is dropped after the first
    /// stage since it repeats the previous stage's output.
    pub fn flattened(&self) -> Vec<LadderRecord> {
        let mut out = Vec::new();
        let (mut iter_offset, mut time_offset) = (0usize, 0.0f64);
        for (i, stage) in self.stages.iter().enumerate() {
            for rec in &stage.trace.records {
                if i > 0 && rec.iteration == 0 {
                    continue;
                }
                let mut record = *rec;
                record.iteration += iter_offset;
                record.elapsed_s += time_offset;
                out.push(LadderRecord {
                    record,
                    gamma: stage.gamma,
                    epsilon: stage.epsilon,
                });
            }
            iter_offset += stage.trace.iterations;
            time_offset += stage.trace.last().map_or(0.0, |r| r.elapsed_s);
        }
        out
    }
}

/// Runs the ladder with the engine named in `ladder`.
pub fn run_ladder(
    instance: &BilevelInstance,
    x0: ArrayView1<f64>,
    ladder: &LadderConfig,
    apg: &ApgConfig,
) -> Result<LadderResult> {
    ladder.validate()?;
    if x0.len() != instance.dim {
        return Err(Error::DimensionMismatch { expected: instance.dim, found: x0.len() });
    }
    let mut x = x0.to_owned();
    let mut stages = Vec::new();
    for k in 0..MAX_STAGES {
        let gamma = ladder.gamma_at(k);
        let epsilon = ladder.epsilon_at(k);
        let objective = assemble_penalized(instance, gamma)?;
        let config = ApgConfig { epsilon, ..apg.clone() };
        let out = match ladder.engine {
            Engine::Apg => pb_apg(&objective, x.view(), &config)?,
            Engine::ApgSc => pb_apg_sc(&objective, objective.strong_convexity(), x.view(), &config)?,
        };
        x = out.x;
        stages.push(Stage {
            index: k,
            gamma,
            epsilon,
            upper_value: objective.upper_value(x.view()),
            lower_residual: objective.lower_residual(x.view()),
            trace: out.trace,
        });
        if ladder.is_last(k) {
            return Ok(LadderResult { x, stages });
        }
    }
    Err(Error::InvalidLadder(format!("stopping rule not met within {MAX_STAGES} stages")))
}

/// Adaptive ladder over the accelerated proximal gradient engine.
pub fn apb_apg(instance: &BilevelInstance, x0: ArrayView1<f64>, ladder: &LadderConfig, apg: &ApgConfig) -> Result<LadderResult> {
    run_ladder(instance, x0, &LadderConfig { engine: Engine::Apg, ..ladder.clone() }, apg)
}

/// Adaptive ladder over the strongly convex engine; `μ` at each stage is the
/// strong convexity modulus of the assembled smooth part.
pub fn apb_apg_sc(
    instance: &BilevelInstance,
    x0: ArrayView1<f64>,
    ladder: &LadderConfig,
    apg: &ApgConfig,
) -> Result<LadderResult> {
    run_ladder(instance, x0, &LadderConfig { engine: Engine::ApgSc, ..ladder.clone() }, apg)
}
