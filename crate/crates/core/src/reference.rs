//! High-accuracy reference values: the lower-level optimum `G*`, the
//! upper-level optimum `F*` over a relaxed solution set, and minimum-norm
//! least squares.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::apg::{next_theta, pb_apg, ApgConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::prox::compose_prox;
use crate::model::{assemble_penalized, BilevelInstance, ErrorBound, NonsmoothTerm, PenalizedObjective, SmoothTerm};

/// CGLS stopping tolerance for minimum-norm least squares.
pub const MIN_NORM_TOLERANCE: f64 = 1e-13;
/// Default gradient-mapping tolerance for `G*`.
pub const LOWER_TOLERANCE: f64 = 1e-12;
/// Iteration cap of the reference runs for `G*`.
pub const LOWER_MAX_ITERS: usize = 10_000_000;
/// Iterations between convergence checks of a reference run; momentum is
/// also reset at these boundaries.
const CHUNK: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    MinNormLeastSquares,
    AcceleratedProxGradient,
    PenaltyEscalation,
    AffineDual,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub g_star: f64,
    pub f_star: Option<f64>,
    pub method: ReferenceMethod,
    /// Normal-equation residual or gradient-mapping norm at the reference point.
    pub residual_certificate: f64,
    /// `δ` in the relaxed constraint `G(x) − G* ≤ δ` used for `F*`.
    pub relaxation_epsilon: Option<f64>,
    /// `G(x) − G*` at the point reported for `F*`.
    pub achieved_lower_gap: Option<f64>,
    /// Penalty at which the relaxed constraint was met.
    pub gamma: Option<f64>,
    pub iterations: usize,
    #[serde(skip)]
    pub point: Array1<f64>,
}

/// Minimum-Euclidean-norm minimizer of `||Ax − b||` by CGLS from zero.
pub fn min_norm_least_squares(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let cap = 20 * (a.nrows() + a.ncols()) + 100;
    linalg::cgls(a, b, MIN_NORM_TOLERANCE, cap)
}

/// `||Aᵀ(Ax − b)||`
pub fn normal_equation_residual(a: ArrayView2<f64>, b: ArrayView1<f64>, x: ArrayView1<f64>) -> f64 {
    let r = a.dot(&x) - b;
    linalg::norm(a.t().dot(&r).view())
}

pub(crate) struct CompositeSolution {
    pub x: Array1<f64>,
    pub certificate: f64,
    pub iterations: usize,
}

/// Minimizes a composite objective with restarted accelerated proximal
/// gradient until the gradient-mapping norm is at most `tolerance`.
pub(crate) fn minimize_composite(
    objective: &PenalizedObjective,
    x0: ArrayView1<f64>,
    tolerance: f64,
    max_iters: usize,
) -> Result<CompositeSolution> {
    let config = ApgConfig {
        max_iters: Some(CHUNK),
        epsilon: f64::MIN_POSITIVE,
        restart: true,
        record_every: usize::MAX,
        ..ApgConfig::default()
    };
    let mut x = x0.to_owned();
    let mut iterations = 0;
    let mut certificate = objective.gradient_mapping_norm(x.view())?;
    while certificate > tolerance {
        if iterations >= max_iters {
            return Err(Error::Nonconvergence {
                iterations,
                best_value: objective.value(x.view()),
                certificate,
            });
        }
        let out = pb_apg(objective, x.view(), &config)?;
        iterations += out.trace.iterations;
        x = out.x;
        certificate = objective.gradient_mapping_norm(x.view())?;
    }
    Ok(CompositeSolution { x, certificate, iterations })
}

fn lower_level_only(instance: &BilevelInstance) -> Result<BilevelInstance> {
    BilevelInstance::new(
        instance.dim,
        (SmoothTerm::zero(), NonsmoothTerm::zero()),
        (instance.g1.clone(), instance.g2.clone()),
        ErrorBound::new(1.0, 1.0)?,
        1.0,
    )
}

/// `G*` with a convergence certificate. Least-squares lower levels use the
/// minimum-norm solution; everything else a long restarted APG run.
pub fn lower_opt_value(instance: &BilevelInstance, tolerance: f64) -> Result<ReferenceReport> {
    if let (Some((a, b)), true) = (instance.g1.least_squares_data(), instance.g2.is_zero()) {
        let x = min_norm_least_squares(a.view(), b.view());
        let certificate = normal_equation_residual(a.view(), b.view(), x.view());
        return Ok(ReferenceReport {
            g_star: instance.lower_value(x.view()),
            f_star: None,
            method: ReferenceMethod::MinNormLeastSquares,
            residual_certificate: certificate,
            relaxation_epsilon: None,
            achieved_lower_gap: None,
            gamma: None,
            iterations: 0,
            point: x,
        });
    }
    lower_opt_value_iterative(instance, tolerance)
}

/// `G*` by restarted APG on `G` alone, regardless of structure.
pub fn lower_opt_value_iterative(instance: &BilevelInstance, tolerance: f64) -> Result<ReferenceReport> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance = {tolerance} must be > 0")));
    }
    let objective = assemble_penalized(&lower_level_only(instance)?, 1.0)?;
    let x0 = Array1::zeros(instance.dim);
    let sol = minimize_composite(&objective, x0.view(), tolerance, LOWER_MAX_ITERS)?;
    Ok(ReferenceReport {
        g_star: instance.lower_value(sol.x.view()),
        f_star: None,
        method: ReferenceMethod::AcceleratedProxGradient,
        residual_certificate: sol.certificate,
        relaxation_epsilon: None,
        achieved_lower_gap: None,
        gamma: None,
        iterations: sol.iterations,
        point: sol.x,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscalationConfig {
    pub gamma_start: f64,
    pub growth: f64,
    pub gamma_limit: f64,
    /// Gradient-mapping tolerance per penalized solve, relative to `max(1, γ)`.
    pub tolerance: f64,
    pub max_iters_per_solve: usize,
}

impl Default for EscalationConfig {
    fn default() -> Self {
        EscalationConfig {
            gamma_start: 1.0,
            growth: 10.0,
            gamma_limit: 1e12,
            tolerance: 1e-10,
            max_iters_per_solve: 2_000_000,
        }
    }
}

/// `F* = min F(x) s.t. G(x) − G* ≤ relaxation` by escalating `γ` until the
/// penalized minimizer meets the constraint. The reported point minimizes `F`
/// exactly over `{G − G* ≤ achieved gap}`, so `F*` is attained there.
pub fn upper_opt_value(instance: &BilevelInstance, g_star: f64, relaxation: f64) -> Result<ReferenceReport> {
    upper_opt_value_with(instance, g_star, relaxation, &EscalationConfig::default())
}

pub fn upper_opt_value_with(
    instance: &BilevelInstance,
    g_star: f64,
    relaxation: f64,
    config: &EscalationConfig,
) -> Result<ReferenceReport> {
    if !(relaxation > 0.0) || !(config.growth > 1.0) || !(config.gamma_start > 0.0) {
        return Err(Error::InvalidArgument(
            "relaxation and gamma_start must be positive and growth must exceed 1".into(),
        ));
    }
    let instance = instance.clone().with_lower_opt_value(g_star);
    let mut x = Array1::zeros(instance.dim);
    let mut gamma = config.gamma_start;
    let mut iterations = 0;
    let mut achieved = f64::INFINITY;
    while gamma <= config.gamma_limit {
        let objective = assemble_penalized(&instance, gamma)?;
        let sol = minimize_composite(&objective, x.view(), config.tolerance * gamma.max(1.0), config.max_iters_per_solve)?;
        iterations += sol.iterations;
        x = sol.x;
        achieved = instance.lower_value(x.view()) - g_star;
        if achieved <= relaxation {
            return Ok(ReferenceReport {
                g_star,
                f_star: Some(instance.upper_value(x.view())),
                method: ReferenceMethod::PenaltyEscalation,
                residual_certificate: sol.certificate,
                relaxation_epsilon: Some(relaxation),
                achieved_lower_gap: Some(achieved),
                gamma: Some(gamma),
                iterations,
                point: x,
            });
        }
        gamma *= config.growth;
    }
    Err(Error::RelaxationUnreachable {
        target: relaxation,
        achieved,
        gamma_limit: config.gamma_limit,
    })
}

/// Iteration cap of the dual reference solve.
pub const DUAL_MAX_ITERS: usize = 2_000_000;

/// `F*` for a least-squares lower level and `F = (τ/2)||x||² + f2`, solved
/// exactly over `X_opt = {x : Ax = A·x_mn}` through the smooth dual
/// `d(λ) = min_x F(x) + λᵀ(Ax − c)` with `x(λ) = prox_{f2/τ}(−Aᵀλ/τ)`.
/// Stops once `||Ax(λ) − c|| ≤ tolerance·(1 + ||c||)`. The reported lower
/// gap is exactly `||Ax − c||²/(2m)`, and `d(λ) ≤ F*` holds throughout.
pub fn upper_opt_value_dual(instance: &BilevelInstance, tolerance: f64) -> Result<ReferenceReport> {
    let unsupported = || Error::UnsupportedTerm("dual reference needs a least-squares lower level and a ridge upper level".into());
    let (a, b) = instance.g1.least_squares_data().ok_or_else(unsupported)?;
    let tau = instance.f1.ridge_weight().filter(|t| *t > 0.0).ok_or_else(unsupported)?;
    if !instance.g2.is_zero() {
        return Err(unsupported());
    }
    let prox = compose_prox(&instance.f2, &NonsmoothTerm::zero(), 1.0)?;
    let x_mn = min_norm_least_squares(a.view(), b.view());
    let c = a.dot(&x_mn);
    let g_star = instance.lower_value(x_mn.view());
    let lipschitz = linalg::gram_lambda_max(a.view()) / tau;
    let primal = |lambda: &Array1<f64>| {
        let y = a.t().dot(lambda) / -tau;
        let x = prox.prox(y.view(), 1.0 / tau);
        let r = a.dot(&x) - &c;
        let dual = instance.upper_value(x.view()) + lambda.dot(&r);
        (x, r, dual)
    };
    let threshold = tolerance * (1.0 + linalg::norm(c.view()));
    let mut lambda = Array1::<f64>::zeros(a.nrows());
    let mut lambda_prev = lambda.clone();
    let (mut theta_prev, mut theta) = (1.0, 1.0);
    let (mut x, mut r, mut dual) = primal(&lambda);
    let mut iterations = 0;
    while linalg::norm(r.view()) > threshold {
        if iterations >= DUAL_MAX_ITERS {
            return Err(Error::Nonconvergence {
                iterations,
                best_value: dual,
                certificate: linalg::norm(r.view()),
            });
        }
        let beta = theta * (1.0 / theta_prev - 1.0);
        let probe = &lambda + &((&lambda - &lambda_prev) * beta);
        let (_, r_probe, _) = primal(&probe);
        lambda_prev = std::mem::replace(&mut lambda, probe + r_probe / lipschitz);
        let next = primal(&lambda);
        theta_prev = theta;
        theta = next_theta(theta);
        if next.2 < dual {
            theta_prev = 1.0;
            theta = 1.0;
        }
        (x, r, dual) = next;
        iterations += 1;
    }
    let gap = r.dot(&r) / (2.0 * a.nrows() as f64);
    Ok(ReferenceReport {
        g_star,
        f_star: Some(instance.upper_value(x.view())),
        method: ReferenceMethod::AffineDual,
        residual_certificate: linalg::norm(r.view()),
        relaxation_epsilon: Some(gap),
        achieved_lower_gap: Some(gap),
        gamma: None,
        iterations,
        point: x,
    })
}

/// Null-space probe: the component of `v` orthogonal to the row space of `A`,
/// i.e. `v − A⁺Av`, computed with CGLS. Nonzero output certifies a nontrivial
/// null space.
pub fn null_space_component(a: ArrayView2<f64>, v: ArrayView1<f64>) -> Array1<f64> {
    let av = a.dot(&v);
    let row_part = min_norm_least_squares(a, av.view());
    &v - &row_part
}

/// Dense `AᵀA`, for small diagnostics.
pub fn gram(a: ArrayView2<f64>) -> Array2<f64> {
    a.t().dot(&a)
}
