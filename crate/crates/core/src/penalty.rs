//! Penalty parameter calculus and a posteriori certification.
//!
//! Under a Hölderian error bound `dist(x, X_opt)^α ≤ ρ·p(x)` with
//! `p(x) = G(x) − G*`, and upper-level subgradients bounded by `l_F` on
//! `X_opt`, any `ε`-minimizer of `F + γ·p` with
//!
//! ```text
//! γ = γ* + 2·l_F^β·ε^(1−β)   (α > 1)
//! γ = γ* +   l_F^β·ε^(1−β)   (α = 1)
//! ```
//!
//! is `(ε, l_F^(−β)·ε^β)`-optimal for the bilevel problem, and its
//! upper-level gap is at least `−l_F·(ρ·l_F^(−β)·ε^β)^(1/α)`.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BilevelInstance, ErrorBound};

/// Default absolute slack for certificate comparisons.
pub const CERTIFY_TOLERANCE: f64 = 1e-9;

fn validate(alpha: f64, rho: f64, l_f: f64, epsilon: f64) -> Result<()> {
    ErrorBound { alpha, rho }.validate()?;
    if !(l_f > 0.0) {
        return Err(Error::InvalidErrorBound(format!("l_F = {l_f} must be > 0")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidErrorBound(format!("epsilon = {epsilon} must be > 0")));
    }
    Ok(())
}

/// `(α − 1)^(α − 1)` with `0⁰ = 1`.
fn holder_factor(alpha: f64) -> f64 {
    let e = alpha - 1.0;
    if e == 0.0 {
        1.0
    } else {
        e.powf(e)
    }
}

/// Penalty threshold `γ*`: `ρ·l_F^α·(α−1)^(α−1)·α^(−α)·ε^(1−α)` for `α > 1`,
/// `ρ·l_F` for `α = 1`.
pub fn gamma_star(alpha: f64, rho: f64, l_f: f64, epsilon: f64) -> Result<f64> {
    validate(alpha, rho, l_f, epsilon)?;
    if alpha == 1.0 {
        return Ok(rho * l_f);
    }
    Ok(rho * l_f.powf(alpha) * holder_factor(alpha) * alpha.powf(-alpha) * epsilon.powf(1.0 - alpha))
}

/// The penalty parameter that certifies `(ε, l_F^(−β)ε^β)`-optimality.
pub fn gamma_total(alpha: f64, rho: f64, l_f: f64, epsilon: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidErrorBound(format!("beta = {beta} must be > 0")));
    }
    let star = gamma_star(alpha, rho, l_f, epsilon)?;
    let margin = l_f.powf(beta) * epsilon.powf(1.0 - beta);
    Ok(if alpha == 1.0 { star + margin } else { star + 2.0 * margin })
}

/// `−l_F·(ρ·l_F^(−β)·ε^β)^(1/α)`.
pub fn suboptimality_lower_bound(alpha: f64, rho: f64, l_f: f64, epsilon: f64, beta: f64) -> Result<f64> {
    validate(alpha, rho, l_f, epsilon)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidErrorBound(format!("beta = {beta} must be > 0")));
    }
    Ok(-l_f * (rho * l_f.powf(-beta) * epsilon.powf(beta)).powf(1.0 / alpha))
}

/// Penalty parameters and the gap targets they guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPlan {
    pub epsilon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
    pub l_f: f64,
    pub gamma_star: f64,
    pub gamma: f64,
    pub guaranteed_upper_gap: f64,
    pub guaranteed_lower_gap: f64,
    pub lower_bound_f: f64,
}

impl PenaltyPlan {
    pub fn new(error_bound: ErrorBound, l_f: f64, epsilon: f64, beta: f64) -> Result<Self> {
        let ErrorBound { alpha, rho } = error_bound;
        Ok(PenaltyPlan {
            epsilon,
            beta,
            alpha,
            rho,
            l_f,
            gamma_star: gamma_star(alpha, rho, l_f, epsilon)?,
            gamma: gamma_total(alpha, rho, l_f, epsilon, beta)?,
            guaranteed_upper_gap: epsilon,
            guaranteed_lower_gap: l_f.powf(-beta) * epsilon.powf(beta),
            lower_bound_f: suboptimality_lower_bound(alpha, rho, l_f, epsilon, beta)?,
        })
    }

    /// Plan for an instance, using its error bound and `l_F`.
    pub fn for_instance(instance: &BilevelInstance, epsilon: f64, beta: f64) -> Result<Self> {
        Self::new(instance.error_bound, instance.subgrad_diameter, epsilon, beta)
    }
}

/// Measured gaps of a candidate point against a plan's targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `F(x) − F*`, when `F*` was supplied.
    pub upper_gap: Option<f64>,
    /// `G(x) − G*`.
    pub lower_gap: f64,
    pub target_upper: f64,
    pub target_lower: f64,
    pub lower_bound_f: f64,
    pub tolerance: f64,
    pub lower_pass: bool,
    /// `None` when `F*` was not supplied.
    pub upper_pass: Option<bool>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.lower_pass && self.upper_pass.unwrap_or(true)
    }
}

/// Certify `x` against `plan` with the default tolerance.
pub fn certify(
    instance: &BilevelInstance,
    x: ArrayView1<f64>,
    plan: &PenaltyPlan,
    f_star: Option<f64>,
) -> Result<Certificate> {
    certify_with_tolerance(instance, x, plan, f_star, CERTIFY_TOLERANCE)
}

/// Compare `G(x) − G*` with `l_F^(−β)ε^β` and, if `F*` is known, check
/// `F(x) − F* ∈ [lower_bound_F − tol, ε + tol]`.
pub fn certify_with_tolerance(
    instance: &BilevelInstance,
    x: ArrayView1<f64>,
    plan: &PenaltyPlan,
    f_star: Option<f64>,
    tolerance: f64,
) -> Result<Certificate> {
    let lower_gap = instance.lower_residual(x)?;
    let upper_gap = f_star.map(|f| instance.upper_value(x) - f);
    Ok(Certificate {
        upper_gap,
        lower_gap,
        target_upper: plan.guaranteed_upper_gap,
        target_lower: plan.guaranteed_lower_gap,
        lower_bound_f: plan.lower_bound_f,
        tolerance,
        lower_pass: lower_gap <= plan.guaranteed_lower_gap + tolerance,
        upper_pass: upper_gap
            .map(|gap| gap >= plan.lower_bound_f - tolerance && gap <= plan.guaranteed_upper_gap + tolerance),
    })
}

/// `l_F` for `F = ½||x||²` when `X_opt` lies in the l1 ball of radius `θ`:
/// `||∇F(x)|| = ||x||₂ ≤ ||x||₁ ≤ θ`.
pub fn lf_half_squared_norm_in_l1_ball(theta: f64) -> f64 {
    theta
}

/// Heuristic `l_F` for `F = (τ/2)||x||² + ||x||₁` on `X_opt` within the
/// Euclidean ball of radius `r` in `n` dimensions: `τ·r + √n`.
pub fn lf_elastic_net(tau: f64, radius: f64, n: usize) -> f64 {
    tau * radius + (n as f64).sqrt()
}
