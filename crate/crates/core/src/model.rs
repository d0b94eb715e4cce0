//! Composite bilevel problem representation.
//!
//! A [`BilevelInstance`] holds an upper-level objective `F = f1 + f2` and a
//! lower-level objective `G = g1 + g2`, where `f1, g1` are smooth
//! ([`SmoothTerm`]) and `f2, g2` are possibly nonsmooth ([`NonsmoothTerm`]).
//! [`assemble_penalized`] turns an instance and a penalty parameter `γ` into
//! the single-level problem `min φ_γ + ψ_γ` with `φ_γ = f1 + γ g1` and
//! `ψ_γ = f2 + γ g2`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::prox::{compose_prox, ProxSpec};

/// Value and gradient oracle for a user-supplied smooth function.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: ArrayView1<f64>) -> f64;
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64>;
}

#[derive(Clone, Debug)]
enum SmoothKind {
    Zero,
    /// `(scale/2)·||x − center||²`
    SquaredDistance {
        scale: f64,
        center: Option<Arc<Array1<f64>>>,
    },
    /// `½ xᵀQx + cᵀx`
    Quadratic {
        hessian: Arc<Array2<f64>>,
        linear: Arc<Array1<f64>>,
    },
    /// `(1/2m)·||Ax − b||²`
    LeastSquares {
        a: Arc<Array2<f64>>,
        b: Arc<Array1<f64>>,
    },
    /// `(1/m)·Σ log(1 + exp(−b_i a_iᵀx))`
    Logistic {
        a: Arc<Array2<f64>>,
        b: Arc<Array1<f64>>,
    },
    Sum(Vec<(f64, SmoothTerm)>),
    Custom(Arc<dyn SmoothOracle>),
}

/// A differentiable convex function with Lipschitz gradient.
#[derive(Clone, Debug)]
pub struct SmoothTerm {
    kind: SmoothKind,
    lipschitz_grad: f64,
    strong_convexity: f64,
}

impl SmoothTerm {
    pub fn zero() -> Self {
        SmoothTerm {
            kind: SmoothKind::Zero,
            lipschitz_grad: 0.0,
            strong_convexity: 0.0,
        }
    }

    /// `(scale/2)·||x||²`, which is `scale`-smooth and `scale`-strongly convex.
    pub fn half_squared_norm(scale: f64) -> Self {
        SmoothTerm {
            kind: SmoothKind::SquaredDistance { scale, center: None },
            lipschitz_grad: scale,
            strong_convexity: scale,
        }
    }

    /// `(scale/2)·||x − center||²`.
    pub fn squared_distance(scale: f64, center: Array1<f64>) -> Self {
        SmoothTerm {
            kind: SmoothKind::SquaredDistance {
                scale,
                center: Some(Arc::new(center)),
            },
            lipschitz_grad: scale,
            strong_convexity: scale,
        }
    }

    /// `½ xᵀQx + cᵀx` for symmetric positive semidefinite `Q`. The constants
    /// are the extreme eigenvalues of `Q`, computed by power iteration.
    pub fn quadratic(hessian: Array2<f64>, linear: Array1<f64>) -> Self {
        let (lmax, lmin) = linalg::symmetric_extreme_eigenvalues(hessian.view());
        Self::quadratic_with_constants(hessian, linear, lmax, lmin)
    }

    /// Quadratic with caller-supplied smoothness and strong-convexity moduli.
    pub fn quadratic_with_constants(
        hessian: Array2<f64>,
        linear: Array1<f64>,
        lipschitz_grad: f64,
        strong_convexity: f64,
    ) -> Self {
        SmoothTerm {
            kind: SmoothKind::Quadratic {
                hessian: Arc::new(hessian),
                linear: Arc::new(linear),
            },
            lipschitz_grad,
            strong_convexity,
        }
    }

    /// `(1/2m)·||Ax − b||²` with `L = λ_max(AᵀA)/m`.
    pub fn least_squares(a: Array2<f64>, b: Array1<f64>) -> Self {
        let lipschitz_grad = lipschitz_least_squares(a.view());
        SmoothTerm {
            kind: SmoothKind::LeastSquares {
                a: Arc::new(a),
                b: Arc::new(b),
            },
            lipschitz_grad,
            strong_convexity: 0.0,
        }
    }

    /// Average logistic loss with labels in `{−1, +1}` and
    /// `L = λ_max(AᵀA)/(4m)`.
    pub fn logistic(a: Array2<f64>, b: Array1<f64>) -> Self {
        let lipschitz_grad = lipschitz_logistic(a.view());
        SmoothTerm {
            kind: SmoothKind::Logistic {
                a: Arc::new(a),
                b: Arc::new(b),
            },
            lipschitz_grad,
            strong_convexity: 0.0,
        }
    }

    pub fn custom(oracle: Arc<dyn SmoothOracle>, lipschitz_grad: f64, strong_convexity: f64) -> Self {
        SmoothTerm {
            kind: SmoothKind::Custom(oracle),
            lipschitz_grad,
            strong_convexity,
        }
    }

    /// `Σ w_i·term_i` for nonnegative weights. Constants combine linearly.
    pub fn weighted_sum(parts: Vec<(f64, SmoothTerm)>) -> Self {
        let parts: Vec<_> = parts.into_iter().filter(|(_, t)| !t.is_zero()).collect();
        let (mut lipschitz_grad, mut strong_convexity) = (0.0, 0.0);
        for (w, t) in &parts {
            lipschitz_grad += w * t.lipschitz_grad;
            strong_convexity += w * t.strong_convexity;
        }
        if parts.is_empty() {
            return Self::zero();
        }
        SmoothTerm {
            kind: SmoothKind::Sum(parts),
            lipschitz_grad,
            strong_convexity,
        }
    }

    pub fn lipschitz_grad(&self) -> f64 {
        self.lipschitz_grad
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SmoothKind::Zero)
    }

    /// `(A, b)` when this is a least-squares term.
    pub fn least_squares_data(&self) -> Option<(&Array2<f64>, &Array1<f64>)> {
        match &self.kind {
            SmoothKind::LeastSquares { a, b } => Some((a, b)),
            _ => None,
        }
    }

    /// `τ` when this term is exactly `(τ/2)·||x||²`.
    pub fn ridge_weight(&self) -> Option<f64> {
        match &self.kind {
            SmoothKind::SquaredDistance { scale, center: None } => Some(*scale),
            _ => None,
        }
    }

    /// Dimension implied by the term's data, if any.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            SmoothKind::Zero | SmoothKind::Custom(_) => None,
            SmoothKind::SquaredDistance { center, .. } => center.as_ref().map(|c| c.len()),
            SmoothKind::Quadratic { hessian, .. } => Some(hessian.ncols()),
            SmoothKind::LeastSquares { a, .. } | SmoothKind::Logistic { a, .. } => Some(a.ncols()),
            SmoothKind::Sum(parts) => parts.iter().find_map(|(_, t)| t.dim()),
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            SmoothKind::Zero => "zero",
            SmoothKind::SquaredDistance { .. } => "squared_distance",
            SmoothKind::Quadratic { .. } => "quadratic",
            SmoothKind::LeastSquares { .. } => "least_squares",
            SmoothKind::Logistic { .. } => "logistic",
            SmoothKind::Sum(_) => "sum",
            SmoothKind::Custom(_) => "custom",
        }
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        match &self.kind {
            SmoothKind::Zero => 0.0,
            SmoothKind::SquaredDistance { scale, center } => {
                let d2 = match center {
                    Some(c) => {
                        let d = linalg::distance(x, c.view());
                        d * d
                    }
                    None => x.dot(&x),
                };
                0.5 * scale * d2
            }
            SmoothKind::Quadratic { hessian, linear } => {
                0.5 * x.dot(&hessian.dot(&x)) + linear.dot(&x)
            }
            SmoothKind::LeastSquares { a, b } => {
                let r = a.dot(&x) - &**b;
                r.dot(&r) / (2.0 * a.nrows() as f64)
            }
            SmoothKind::Logistic { a, b } => logistic_loss(a.view(), b.view(), x).0,
            SmoothKind::Sum(parts) => parts.iter().map(|(w, t)| w * t.value(x)).sum(),
            SmoothKind::Custom(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match &self.kind {
            SmoothKind::Zero => Array1::zeros(x.len()),
            SmoothKind::SquaredDistance { scale, center } => match center {
                Some(c) => (&x - &**c) * *scale,
                None => &x * *scale,
            },
            SmoothKind::Quadratic { hessian, linear } => hessian.dot(&x) + &**linear,
            SmoothKind::LeastSquares { a, b } => {
                let r = a.dot(&x) - &**b;
                a.t().dot(&r) / a.nrows() as f64
            }
            SmoothKind::Logistic { a, b } => logistic_loss(a.view(), b.view(), x).1,
            SmoothKind::Sum(parts) => {
                let mut iter = parts.iter();
                let Some((w0, t0)) = iter.next() else {
                    return Array1::zeros(x.len());
                };
                let mut g = t0.gradient(x);
                if *w0 != 1.0 {
                    g *= *w0;
                }
                for (w, t) in iter {
                    g.scaled_add(*w, &t.gradient(x));
                }
                g
            }
            SmoothKind::Custom(o) => o.gradient(x),
        }
    }
}

/// Extended-real sentinel returned by indicator terms outside their set.
pub const INFEASIBLE: f64 = f64::INFINITY;

/// Relative slack used when testing membership in an indicator's set, so
/// that exactly projected points are not rejected over rounding.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// User-supplied nonsmooth convex term.
pub trait CustomNonsmooth: Send + Sync + fmt::Debug {
    fn value(&self, x: ArrayView1<f64>) -> f64;

    /// Whether [`CustomNonsmooth::prox`] is implemented.
    fn has_prox(&self) -> bool {
        false
    }

    /// `argmin_x h(x) + (1/2t)||x − y||²`, if available in closed form.
    fn prox(&self, _y: ArrayView1<f64>, _t: f64) -> Option<Array1<f64>> {
        None
    }

    /// Some member of `∂h(x)`, if the term is Lipschitz.
    fn subgradient(&self, _x: ArrayView1<f64>) -> Option<Array1<f64>> {
        None
    }

    /// Indicator functions are invariant under positive scaling.
    fn is_indicator(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub enum NonsmoothKind {
    Zero,
    /// `weight·||x||₁`
    L1Norm { weight: f64 },
    /// `l1·||x||₁ + (l2/2)·||x||²`
    ElasticNet { l1: f64, l2: f64 },
    /// Indicator of `{x : ||x||₁ ≤ radius}`.
    L1Ball { radius: f64 },
    /// Indicator of `{x : lo ≤ x ≤ hi}`.
    Box { lo: Array1<f64>, hi: Array1<f64> },
    /// `max_i (s_iᵀx + c_i)`; Lipschitz but not prox-friendly.
    MaxAffine {
        slopes: Arc<Array2<f64>>,
        intercepts: Array1<f64>,
    },
    Custom(Arc<dyn CustomNonsmooth>),
}

/// A possibly nonsmooth convex term with an optional Lipschitz constant
/// (needed by the subgradient method).
#[derive(Clone, Debug)]
pub struct NonsmoothTerm {
    pub kind: NonsmoothKind,
    pub lipschitz: Option<f64>,
}

impl NonsmoothTerm {
    pub fn new(kind: NonsmoothKind) -> Self {
        NonsmoothTerm { kind, lipschitz: None }
    }

    pub fn zero() -> Self {
        Self::new(NonsmoothKind::Zero)
    }

    pub fn l1_norm(weight: f64) -> Self {
        Self::new(NonsmoothKind::L1Norm { weight })
    }

    pub fn elastic_net(l1: f64, l2: f64) -> Self {
        Self::new(NonsmoothKind::ElasticNet { l1, l2 })
    }

    pub fn l1_ball(radius: f64) -> Self {
        Self::new(NonsmoothKind::L1Ball { radius })
    }

    pub fn boxed(lo: Array1<f64>, hi: Array1<f64>) -> Self {
        Self::new(NonsmoothKind::Box { lo, hi })
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn uniform_box(n: usize, lo: f64, hi: f64) -> Self {
        Self::boxed(Array1::from_elem(n, lo), Array1::from_elem(n, hi))
    }

    pub fn max_affine(slopes: Array2<f64>, intercepts: Array1<f64>) -> Self {
        Self::new(NonsmoothKind::MaxAffine {
            slopes: Arc::new(slopes),
            intercepts,
        })
    }

    pub fn custom(term: Arc<dyn CustomNonsmooth>) -> Self {
        Self::new(NonsmoothKind::Custom(term))
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonsmoothKind::Zero)
    }

    pub fn is_indicator(&self) -> bool {
        match &self.kind {
            NonsmoothKind::L1Ball { .. } | NonsmoothKind::Box { .. } => true,
            NonsmoothKind::Custom(c) => c.is_indicator(),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            NonsmoothKind::Zero => "zero",
            NonsmoothKind::L1Norm { .. } => "l1_norm",
            NonsmoothKind::ElasticNet { .. } => "elastic_net",
            NonsmoothKind::L1Ball { .. } => "indicator_l1_ball",
            NonsmoothKind::Box { .. } => "indicator_box",
            NonsmoothKind::MaxAffine { .. } => "max_affine",
            NonsmoothKind::Custom(_) => "custom",
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            NonsmoothKind::Box { lo, .. } => Some(lo.len()),
            NonsmoothKind::MaxAffine { slopes, .. } => Some(slopes.ncols()),
            _ => None,
        }
    }

    /// Extended-real value; indicators return [`INFEASIBLE`] outside their set.
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        match &self.kind {
            NonsmoothKind::Zero => 0.0,
            NonsmoothKind::L1Norm { weight } => weight * linalg::norm_l1(x),
            NonsmoothKind::ElasticNet { l1, l2 } => l1 * linalg::norm_l1(x) + 0.5 * l2 * x.dot(&x),
            NonsmoothKind::L1Ball { radius } => {
                if linalg::norm_l1(x) <= radius + FEASIBILITY_TOLERANCE * radius.max(1.0) {
                    0.0
                } else {
                    INFEASIBLE
                }
            }
            NonsmoothKind::Box { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi.iter())).all(|(&v, (&l, &h))| {
                    v >= l - FEASIBILITY_TOLERANCE * l.abs().max(1.0)
                        && v <= h + FEASIBILITY_TOLERANCE * h.abs().max(1.0)
                });
                if inside {
                    0.0
                } else {
                    INFEASIBLE
                }
            }
            NonsmoothKind::MaxAffine { slopes, intercepts } => (slopes.dot(&x) + intercepts)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            NonsmoothKind::Custom(c) => c.value(x),
        }
    }
}

/// Hölderian error-bound constants `dist(x, X_opt)^α ≤ ρ·(G(x) − G*)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorBound {
    pub alpha: f64,
    pub rho: f64,
}

impl ErrorBound {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        let eb = ErrorBound { alpha, rho };
        eb.validate()?;
        Ok(eb)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidErrorBound(format!("alpha = {} must be >= 1", self.alpha)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidErrorBound(format!("rho = {} must be > 0", self.rho)));
        }
        Ok(())
    }
}

/// Catalog of error-bound constants for common lower-level functions.
/// Entries with `rho: None` have a data-dependent modulus the caller must
/// supply.
pub mod error_bound_catalog {
    /// Exponent and (when data-independent) modulus.
    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct CatalogEntry {
        pub name: &'static str,
        pub alpha: f64,
        pub rho: Option<f64>,
    }

    pub const NORM: CatalogEntry = CatalogEntry { name: "Q-norm / l_p-norm", alpha: 1.0, rho: None };
    pub const LEAST_SQUARES: CatalogEntry = CatalogEntry { name: "least squares", alpha: 2.0, rho: None };
    pub const LOGISTIC: CatalogEntry = CatalogEntry { name: "logistic loss", alpha: 2.0, rho: None };
    pub const STRONGLY_CONVEX: CatalogEntry = CatalogEntry { name: "strongly convex", alpha: 2.0, rho: None };

    /// Elastic net `||x||₁ + (τ/2)||x||²`: `(α, ρ) = (1, 1)`.
    pub fn elastic_net_sharp() -> CatalogEntry {
        CatalogEntry { name: "elastic net (sharp)", alpha: 1.0, rho: Some(1.0) }
    }

    /// Elastic net `||x||₁ + (τ/2)||x||²`: `(α, ρ) = (2, 2/τ)`.
    pub fn elastic_net_quadratic(tau: f64) -> CatalogEntry {
        CatalogEntry { name: "elastic net (quadratic growth)", alpha: 2.0, rho: Some(2.0 / tau) }
    }

    /// `η(x) + (σ/2)||x||²`: quadratic growth with `ρ = 2/σ`.
    pub fn strongly_convex(sigma: f64) -> CatalogEntry {
        CatalogEntry { rho: Some(2.0 / sigma), ..STRONGLY_CONVEX }
    }
}

/// Upper-level `F = f1 + f2` over the minimizers of lower-level `G = g1 + g2`.
#[derive(Clone, Debug)]
pub struct BilevelInstance {
    pub dim: usize,
    pub f1: SmoothTerm,
    pub f2: NonsmoothTerm,
    pub g1: SmoothTerm,
    pub g2: NonsmoothTerm,
    pub error_bound: ErrorBound,
    /// `l_F`: bound on the subgradients of `F` over `X_opt`.
    pub subgrad_diameter: f64,
    /// `G*`, once computed by the reference oracles.
    pub lower_opt_value: Option<f64>,
}

impl BilevelInstance {
    pub fn new(
        dim: usize,
        upper: (SmoothTerm, NonsmoothTerm),
        lower: (SmoothTerm, NonsmoothTerm),
        error_bound: ErrorBound,
        subgrad_diameter: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        error_bound.validate()?;
        if !(subgrad_diameter > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "subgradient diameter l_F = {subgrad_diameter} must be > 0"
            )));
        }
        let (f1, f2) = upper;
        let (g1, g2) = lower;
        for found in [f1.dim(), g1.dim(), f2.dim(), g2.dim()].into_iter().flatten() {
            if found != dim {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        Ok(BilevelInstance {
            dim,
            f1,
            f2,
            g1,
            g2,
            error_bound,
            subgrad_diameter,
            lower_opt_value: None,
        })
    }

    pub fn with_lower_opt_value(mut self, g_star: f64) -> Self {
        self.lower_opt_value = Some(g_star);
        self
    }

    pub fn upper_value(&self, x: ArrayView1<f64>) -> f64 {
        self.f1.value(x) + self.f2.value(x)
    }

    pub fn lower_value(&self, x: ArrayView1<f64>) -> f64 {
        self.g1.value(x) + self.g2.value(x)
    }

    /// Residual `p(x) = G(x) − G*`.
    pub fn lower_residual(&self, x: ArrayView1<f64>) -> Result<f64> {
        let g_star = self.lower_opt_value.ok_or(Error::MissingLowerOpt)?;
        Ok(self.lower_value(x) - g_star)
    }
}

/// The penalized single-level problem `Φ_γ = φ_γ + ψ_γ`, optionally
/// multiplied by a positive `scale`.
#[derive(Clone, Debug)]
pub struct PenalizedObjective {
    pub gamma: f64,
    scale: f64,
    /// `φ_γ = f1 + γ g1`
    pub phi: SmoothTerm,
    /// `ψ_γ = f2 + γ g2`; absent when the pair has no exact proximal map.
    psi: Option<ProxSpec>,
    /// Nonsmooth-mode Lipschitz constant `l_γ = l_{f2} + γ l_{g2}`.
    pub l_gamma: Option<f64>,
    f1: SmoothTerm,
    f2: NonsmoothTerm,
    g1: SmoothTerm,
    g2: NonsmoothTerm,
    lower_opt_value: Option<f64>,
}

/// Assemble `φ_γ = f1 + γ g1` and `ψ_γ = f2 + γ g2`.
pub fn assemble_penalized(instance: &BilevelInstance, gamma: f64) -> Result<PenalizedObjective> {
    let objective = PenalizedObjective::from_instance(instance, gamma)?;
    if objective.psi.is_none() {
        return Err(Error::NonComposableProx {
            upper: instance.f2.name().into(),
            lower: instance.g2.name().into(),
        });
    }
    Ok(objective)
}

impl PenalizedObjective {
    /// Build without requiring an exact proximal map for `ψ_γ`. Used by the
    /// subgradient method, which only needs subgradients and a projection.
    pub fn from_instance(instance: &BilevelInstance, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} must be > 0")));
        }
        let phi = SmoothTerm::weighted_sum(vec![(1.0, instance.f1.clone()), (gamma, instance.g1.clone())]);
        let psi = compose_prox(&instance.f2, &instance.g2, gamma).ok();
        let l_gamma = match (instance.f2.lipschitz, instance.g2.lipschitz) {
            (Some(lf), Some(lg)) => Some(lf + gamma * lg),
            (Some(lf), None) if instance.g2.is_zero() || instance.g2.is_indicator() => Some(lf),
            (None, Some(lg)) if instance.f2.is_zero() || instance.f2.is_indicator() => Some(gamma * lg),
            _ => None,
        };
        Ok(PenalizedObjective {
            gamma,
            scale: 1.0,
            phi,
            psi,
            l_gamma,
            f1: instance.f1.clone(),
            f2: instance.f2.clone(),
            g1: instance.g1.clone(),
            g2: instance.g2.clone(),
            lower_opt_value: instance.lower_opt_value,
        })
    }

    /// `c·Φ_γ` for `c > 0`. Positive scaling leaves the minimizers and the
    /// proximal-gradient map with step `1/(c·L_γ)` unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0, "scale must be positive");
        PenalizedObjective {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_l_gamma(mut self, l_gamma: f64) -> Self {
        self.l_gamma = Some(l_gamma);
        self
    }

    pub fn psi(&self) -> Option<&ProxSpec> {
        self.psi.as_ref()
    }

    pub(crate) fn require_psi(&self) -> Result<&ProxSpec> {
        self.psi.as_ref().ok_or_else(|| Error::NonComposableProx {
            upper: self.f2.name().into(),
            lower: self.g2.name().into(),
        })
    }

    /// Lipschitz constant of `∇(scale·φ_γ)`.
    pub fn lipschitz(&self) -> f64 {
        self.scale * self.phi.lipschitz_grad()
    }

    /// `L_γ = L_{f1} + γ L_{g1}` of the unscaled problem.
    pub fn unscaled_lipschitz(&self) -> f64 {
        self.phi.lipschitz_grad()
    }

    /// Strong convexity modulus of `scale·φ_γ`.
    pub fn strong_convexity(&self) -> f64 {
        self.scale * self.phi.strong_convexity()
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let g = self.phi.gradient(x);
        if self.scale == 1.0 {
            g
        } else {
            g * self.scale
        }
    }

    /// `scale·Φ_γ(x)` as an extended real.
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        let nonsmooth = self.f2.value(x) + self.gamma * self.g2.value(x);
        self.scale * (self.phi.value(x) + nonsmooth)
    }

    pub fn upper_value(&self, x: ArrayView1<f64>) -> f64 {
        self.f1.value(x) + self.f2.value(x)
    }

    pub fn lower_value(&self, x: ArrayView1<f64>) -> f64 {
        self.g1.value(x) + self.g2.value(x)
    }

    /// `G(x) − G*`, or `None` when `G*` is unknown.
    pub fn lower_residual(&self, x: ArrayView1<f64>) -> Option<f64> {
        self.lower_opt_value.map(|g| self.lower_value(x) - g)
    }

    pub fn lower_opt_value(&self) -> Option<f64> {
        self.lower_opt_value
    }

    pub(crate) fn terms(&self) -> (&SmoothTerm, &NonsmoothTerm, &SmoothTerm, &NonsmoothTerm) {
        (&self.f1, &self.f2, &self.g1, &self.g2)
    }

    /// One proximal-gradient step `prox_{ψ/L}(y − ∇φ(y)/L)` of the unscaled
    /// problem. The scale cancels between gradient and step size, so scaled
    /// and unscaled objectives produce identical iterates.
    pub(crate) fn prox_grad_step(&self, psi: &ProxSpec, y: ArrayView1<f64>) -> Array1<f64> {
        let lipschitz = self.phi.lipschitz_grad();
        let mut z = self.phi.gradient(y);
        z.mapv_inplace(|g| -g / lipschitz);
        z += &y;
        psi.prox(z.view(), 1.0 / lipschitz)
    }

    /// Gradient-mapping norm `L·||x − prox_{ψ/L}(x − ∇φ(x)/L)||`.
    pub fn gradient_mapping_norm(&self, x: ArrayView1<f64>) -> Result<f64> {
        let psi = self.require_psi()?;
        let next = self.prox_grad_step(psi, x);
        Ok(self.lipschitz() * linalg::distance(x, next.view()))
    }
}

/// `λ_max(AᵀA)/(4m)`, the smoothness constant of the average logistic loss.
pub fn lipschitz_logistic(a: ArrayView2<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    linalg::gram_lambda_max(a) / (4.0 * a.nrows() as f64)
}

/// `λ_max(AᵀA)/m`, the smoothness constant of `(1/2m)||Ax − b||²`.
pub fn lipschitz_least_squares(a: ArrayView2<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    linalg::gram_lambda_max(a) / a.nrows() as f64
}

/// Value and gradient of `(1/m)Σ log(1 + exp(−b_i a_iᵀx))`.
pub fn logistic_value_grad(
    a: ArrayView2<f64>,
    b: ArrayView1<f64>,
    x: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), found: x.len() });
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    Ok(logistic_loss(a, b, x))
}

/// `log(1 + exp(−t))` without overflow.
fn softplus_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `σ(−t) = 1/(1 + exp(t))` without overflow.
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

fn logistic_loss(a: ArrayView2<f64>, b: ArrayView1<f64>, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let m = a.nrows() as f64;
    let margins = a.dot(&x) * b;
    let value = margins.iter().map(|&t| softplus_neg(t)).sum::<f64>() / m;
    let weights = Array1::from_iter(margins.iter().zip(b.iter()).map(|(&t, &bi)| -bi * sigmoid_neg(t) / m));
    (value, a.t().dot(&weights))
}
