//! Projected subgradient method on the penalized problem
//!
//! ```text
//! x_{k+1} = Proj_C(x_k − η_k·ξ_k),   ξ_k ∈ ∂Φ_γ(x_k)
//! ```
//!
//! with either the diminishing steps `η_k = R/(l_γ√(k+1))`, for which the
//! best value satisfies `Φ_best^K − Φ* ≤ (l_γ/4)(R² + 2 ln 2)/√(K+2)`, or the
//! strongly convex steps `η_k = 2/(μ(k+1))` with `Φ_best^K − Φ* ≤ 2l_γ²/(μ(K+1))`.
//! Indicator terms of the instance are handled by the projection onto `C`.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::apg::{Recorder, SolveResult, Termination};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{NonsmoothKind, NonsmoothTerm, PenalizedObjective, FEASIBILITY_TOLERANCE};
use crate::prox::{project_box, project_l1_ball};

/// Closed convex set with an exact projection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    #[default]
    All,
    L1Ball {
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Domain {
    /// The set encoded by the indicator terms among `terms`.
    pub fn from_terms(terms: &[&NonsmoothTerm]) -> Result<Domain> {
        let mut domain = Domain::All;
        for term in terms {
            let next = match &term.kind {
                NonsmoothKind::L1Ball { radius } => Domain::L1Ball { radius: *radius },
                NonsmoothKind::Box { lo, hi } => Domain::Box {
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                },
                NonsmoothKind::Custom(_) if term.is_indicator() => {
                    return Err(Error::UnsupportedTerm("custom indicator has no known projection".into()))
                }
                _ => continue,
            };
            domain = match (domain, next) {
                (Domain::All, d) => d,
                (Domain::Box { lo: l1, hi: h1 }, Domain::Box { lo: l2, hi: h2 }) => Domain::Box {
                    lo: l1.iter().zip(&l2).map(|(a, b)| a.max(*b)).collect(),
                    hi: h1.iter().zip(&h2).map(|(a, b)| a.min(*b)).collect(),
                },
                (Domain::L1Ball { radius: a }, Domain::L1Ball { radius: b }) => Domain::L1Ball { radius: a.min(b) },
                _ => {
                    return Err(Error::UnsupportedTerm(
                        "intersection of an l1 ball and a box has no closed-form projection".into(),
                    ))
                }
            };
        }
        Ok(domain)
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Domain::All => false,
            Domain::L1Ball { .. } => true,
            Domain::Box { lo, hi } => lo.iter().chain(hi).all(|v| v.is_finite()),
        }
    }

    pub fn project(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Domain::All => y.to_owned(),
            Domain::L1Ball { radius } => project_l1_ball(y, *radius),
            Domain::Box { lo, hi } => project_box(y, ArrayView1::from(lo), ArrayView1::from(hi)),
        }
    }

    pub fn contains(&self, x: ArrayView1<f64>) -> bool {
        match self {
            Domain::All => true,
            Domain::L1Ball { radius } => linalg::norm_l1(x) <= radius + FEASIBILITY_TOLERANCE * radius,
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| v >= l && v <= h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_k = R/(l_γ√(k+1))` with `R ≥ ||x_0 − x*||`.
    Diminishing { radius: f64 },
    /// `η_k = 2/(μ(k+1))` for a `μ`-strongly convex objective on a bounded set.
    StronglyConvex { mu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgradConfig {
    pub schedule: StepSchedule,
    pub max_iters: usize,
    pub domain: Domain,
    /// Wall-clock cap in seconds.
    pub time_limit: Option<f64>,
    pub record_every: usize,
}

impl SubgradConfig {
    pub fn new(schedule: StepSchedule, max_iters: usize, domain: Domain) -> Self {
        SubgradConfig {
            schedule,
            max_iters,
            domain,
            time_limit: None,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.schedule {
            StepSchedule::Diminishing { radius } if !(radius > 0.0) => {
                return Err(Error::InvalidArgument(format!("radius = {radius} must be > 0")))
            }
            StepSchedule::StronglyConvex { mu } if !(mu > 0.0) => {
                return Err(Error::InvalidArgument(format!("mu = {mu} must be > 0")))
            }
            StepSchedule::StronglyConvex { .. } if !self.domain.is_bounded() => {
                return Err(Error::InvalidArgument(
                    "the strongly convex schedule needs a bounded domain".into(),
                ))
            }
            _ => {}
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument("max_iters and record_every must be positive".into()));
        }
        Ok(())
    }

    fn step(&self, k: usize, l_gamma: f64) -> f64 {
        match self.schedule {
            StepSchedule::Diminishing { radius } => radius / (l_gamma * ((k + 1) as f64).sqrt()),
            StepSchedule::StronglyConvex { mu } => 2.0 / (mu * (k + 1) as f64),
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A member of `∂h(x)` for a Lipschitz nonsmooth term. Ties are broken
/// deterministically: `sign(0) = 0` and the lowest active piece of a
/// max-affine function.
pub fn subgradient_oracle(term: &NonsmoothTerm, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    match &term.kind {
        NonsmoothKind::Zero => Ok(Array1::zeros(x.len())),
        NonsmoothKind::L1Norm { weight } => Ok(x.mapv(|v| weight * sign(v))),
        NonsmoothKind::ElasticNet { l1, l2 } => Ok(x.mapv(|v| l1 * sign(v) + l2 * v)),
        NonsmoothKind::L1Ball { .. } | NonsmoothKind::Box { .. } => Err(Error::UnsupportedTerm(format!(
            "{} is an indicator; encode it in the projection domain",
            term.name()
        ))),
        NonsmoothKind::MaxAffine { slopes, intercepts } => {
            if x.len() != slopes.ncols() {
                return Err(Error::DimensionMismatch { expected: slopes.ncols(), found: x.len() });
            }
            let values = slopes.dot(&x) + intercepts;
            let mut best = 0;
            for (i, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = i;
                }
            }
            Ok(slopes.row(best).to_owned())
        }
        NonsmoothKind::Custom(c) => {
            if c.is_indicator() {
                return Err(Error::UnsupportedTerm("custom indicator".into()));
            }
            c.subgradient(x)
                .ok_or_else(|| Error::UnsupportedTerm("custom term without a subgradient oracle".into()))
        }
    }
}

fn nonsmooth_part(term: &NonsmoothTerm, x: ArrayView1<f64>) -> Result<Option<Array1<f64>>> {
    if term.is_zero() || term.is_indicator() {
        return Ok(None);
    }
    subgradient_oracle(term, x).map(Some)
}

/// `ξ ∈ ∂Φ_γ(x)` ignoring indicator terms, which the projection enforces.
pub fn penalized_subgradient(objective: &PenalizedObjective, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (_, f2, _, g2) = objective.terms();
    let mut xi = objective.phi.gradient(x);
    if let Some(s) = nonsmooth_part(f2, x)? {
        xi += &s;
    }
    if let Some(s) = nonsmooth_part(g2, x)? {
        xi.scaled_add(objective.gamma, &s);
    }
    if objective.scale() != 1.0 {
        xi *= objective.scale();
    }
    Ok(xi)
}

/// Runs the projected subgradient method and returns the best iterate by
/// penalized value. The trace records the running best.
pub fn subgrad_solve(objective: &PenalizedObjective, x0: ArrayView1<f64>, config: &SubgradConfig) -> Result<SolveResult> {
    config.validate()?;
    if !config.domain.contains(x0) || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InfeasibleStart);
    }
    let l_gamma = match (config.schedule, objective.l_gamma) {
        (StepSchedule::Diminishing { .. }, Some(l)) if l > 0.0 => l,
        (StepSchedule::Diminishing { .. }, _) => {
            return Err(Error::InvalidArgument("diminishing steps need a positive Lipschitz constant l_gamma".into()))
        }
        (StepSchedule::StronglyConvex { .. }, l) => l.unwrap_or(f64::NAN),
    };
    let start = Instant::now();
    let mut recorder = Recorder::new(objective, config.record_every);
    let mut x = x0.to_owned();
    let mut best = x.clone();
    let mut best_value = objective.value(x.view());
    recorder.record(0, best.view(), 0.0, 0.0);

    let mut termination = Termination::MaxIters;
    let mut performed = 0;
    let mut last_step = 0.0;
    for k in 0..config.max_iters {
        let eta = config.step(k, l_gamma);
        let xi = penalized_subgradient(objective, x.view())?;
        let mut y = x.clone();
        y.scaled_add(-eta, &xi);
        let next = config.domain.project(y.view());
        if !next.iter().all(|v| v.is_finite()) {
            return Err(recorder.non_finite(k + 1, next.view(), eta));
        }
        last_step = linalg::distance(next.view(), x.view());
        x = next;
        performed = k + 1;
        let value = objective.value(x.view());
        if value < best_value {
            best_value = value;
            best.assign(&x);
        }
        recorder.maybe_record(performed, best.view(), last_step, eta);
        if config.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            termination = Termination::TimeLimit;
            break;
        }
    }
    recorder.record(performed, best.view(), last_step, config.step(performed.saturating_sub(1), l_gamma));
    Ok(SolveResult {
        x: best,
        trace: recorder.finish(termination, performed),
    })
}

/// `(l_γ/4)(R² + 2 ln 2)/√(K+2)`
pub fn diminishing_bound(l_gamma: f64, radius: f64, iterations: usize) -> f64 {
    0.25 * l_gamma * (radius * radius + 2.0 * std::f64::consts::LN_2) / ((iterations + 2) as f64).sqrt()
}

/// Tail-sum form `(l_γR/2)(1 + Σ 1/(k+1))/Σ 1/√(k+1)` over `k = ⌊K/2⌋..K`,
/// valid for every `K` whenever `R` bounds `||x_k − x*||` for all iterates.
/// The closed form [`diminishing_bound`] relaxes it only for large `K`.
pub fn diminishing_bound_sums(l_gamma: f64, radius: f64, iterations: usize) -> f64 {
    let (harmonic, root) = (iterations / 2..=iterations).fold((0.0, 0.0), |(h, r), k| {
        let t = (k + 1) as f64;
        (h + 1.0 / t, r + 1.0 / t.sqrt())
    });
    0.5 * l_gamma * radius * (1.0 + harmonic) / root
}

/// `2l_γ²/(μ(K+1))`
pub fn strongly_convex_bound(l_gamma: f64, mu: f64, iterations: usize) -> f64 {
    2.0 * l_gamma * l_gamma / (mu * (iterations + 1) as f64)
}
