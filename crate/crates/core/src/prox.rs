//! Exact scaled proximal mappings `argmin_x ψ(x) + (1/2t)||x − y||²`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::model::{CustomNonsmooth, NonsmoothKind, NonsmoothTerm, FEASIBILITY_TOLERANCE, INFEASIBLE};

/// Elementwise soft-thresholding `sign(y_i)·max(|y_i| − λ, 0)`.
pub fn prox_l1(y: ArrayView1<f64>, lambda: f64) -> Array1<f64> {
    y.mapv(|v| soft_threshold(v, lambda))
}

#[inline]
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Euclidean projection onto `{x : ||x||₁ ≤ radius}` by the sort-based
/// threshold rule.
pub fn project_l1_ball(y: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    // points within rounding of the sphere count as feasible so the map is idempotent
    if y.iter().map(|v| v.abs()).sum::<f64>() <= radius + FEASIBILITY_TOLERANCE * radius {
        return y.to_owned();
    }
    let mut u: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    prox_l1(y, tau)
}

/// Projection onto the box `[lo, hi]`.
pub fn project_box(y: ArrayView1<f64>, lo: ArrayView1<f64>, hi: ArrayView1<f64>) -> Array1<f64> {
    Zip::from(&y).and(&lo).and(&hi).map_collect(|&v, &l, &h| v.max(l).min(h))
}

#[derive(Clone, Debug)]
enum Resolved {
    Zero,
    /// `l1·||x||₁ + (l2/2)||x||²`
    ElasticNet { l1: f64, l2: f64 },
    L1Ball { radius: f64 },
    Box { lo: Array1<f64>, hi: Array1<f64> },
    /// Elastic net restricted to a box; separable, so the prox is the clamp
    /// of the unconstrained one.
    ElasticNetBox { l1: f64, l2: f64, lo: Array1<f64>, hi: Array1<f64> },
    Custom { term: Arc<dyn CustomNonsmooth>, weight: f64 },
}

fn resolve(term: &NonsmoothTerm, weight: f64) -> Option<Resolved> {
    Some(match &term.kind {
        NonsmoothKind::Zero => Resolved::Zero,
        NonsmoothKind::L1Norm { weight: w } => Resolved::ElasticNet { l1: weight * w, l2: 0.0 },
        NonsmoothKind::ElasticNet { l1, l2 } => Resolved::ElasticNet {
            l1: weight * l1,
            l2: weight * l2,
        },
        NonsmoothKind::L1Ball { radius } => Resolved::L1Ball { radius: *radius },
        NonsmoothKind::Box { lo, hi } => Resolved::Box { lo: lo.clone(), hi: hi.clone() },
        NonsmoothKind::MaxAffine { .. } => return None,
        NonsmoothKind::Custom(c) if c.has_prox() => Resolved::Custom { term: c.clone(), weight },
        NonsmoothKind::Custom(_) => return None,
    })
}

fn combine(a: Resolved, b: Resolved) -> Option<Resolved> {
    use Resolved::*;
    Some(match (a, b) {
        (Zero, other) | (other, Zero) => other,
        (ElasticNet { l1: a1, l2: a2 }, ElasticNet { l1: b1, l2: b2 }) => ElasticNet { l1: a1 + b1, l2: a2 + b2 },
        (ElasticNet { l1, l2 }, Box { lo, hi }) | (Box { lo, hi }, ElasticNet { l1, l2 }) => {
            ElasticNetBox { l1, l2, lo, hi }
        }
        (Box { lo: lo_a, hi: hi_a }, Box { lo: lo_b, hi: hi_b }) => {
            if lo_a.len() != lo_b.len() {
                return None;
            }
            let lo = Zip::from(&lo_a).and(&lo_b).map_collect(|a, b| a.max(*b));
            let hi = Zip::from(&hi_a).and(&hi_b).map_collect(|a, b| a.min(*b));
            if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                return None;
            }
            Box { lo, hi }
        }
        _ => return None,
    })
}

/// `ψ = f2 + γ·g2` together with its exact proximal mapping.
#[derive(Clone, Debug)]
pub struct ProxSpec {
    upper: NonsmoothTerm,
    lower: NonsmoothTerm,
    gamma: f64,
    resolved: Resolved,
}

/// Build the proximal mapping of `f2 + γ·g2`. Supported: either term zero,
/// sums of separable elastic-net terms, and separable terms restricted to a
/// box. Indicators are invariant under the `γ` scaling.
pub fn compose_prox(f2: &NonsmoothTerm, g2: &NonsmoothTerm, gamma: f64) -> Result<ProxSpec> {
    let unsupported = || Error::NonComposableProx {
        upper: f2.name().into(),
        lower: g2.name().into(),
    };
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be > 0")));
    }
    let upper = resolve(f2, 1.0).ok_or_else(unsupported)?;
    let lower = resolve(g2, gamma).ok_or_else(unsupported)?;
    let resolved = combine(upper, lower).ok_or_else(unsupported)?;
    Ok(ProxSpec {
        upper: f2.clone(),
        lower: g2.clone(),
        gamma,
        resolved,
    })
}

impl ProxSpec {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(f2, g2)` with weights `(1, γ)`.
    pub fn term_kinds(&self) -> (&NonsmoothTerm, &NonsmoothTerm) {
        (&self.upper, &self.lower)
    }

    /// Extended-real value `f2(x) + γ·g2(x)`.
    pub fn evaluate(&self, x: ArrayView1<f64>) -> f64 {
        let upper = self.upper.value(x);
        let lower = self.lower.value(x);
        if upper == INFEASIBLE || lower == INFEASIBLE {
            return INFEASIBLE;
        }
        upper + self.gamma * lower
    }

    /// `argmin_x ψ(x) + (1/2t)||x − y||²`.
    pub fn prox(&self, y: ArrayView1<f64>, t: f64) -> Array1<f64> {
        match &self.resolved {
            Resolved::Zero => y.to_owned(),
            Resolved::ElasticNet { l1, l2 } => {
                let (thr, shrink) = (t * l1, 1.0 + t * l2);
                y.mapv(|v| soft_threshold(v, thr) / shrink)
            }
            Resolved::L1Ball { radius } => project_l1_ball(y, *radius),
            Resolved::Box { lo, hi } => project_box(y, lo.view(), hi.view()),
            Resolved::ElasticNetBox { l1, l2, lo, hi } => {
                let (thr, shrink) = (t * l1, 1.0 + t * l2);
                Zip::from(&y)
                    .and(lo)
                    .and(hi)
                    .map_collect(|&v, &l, &h| (soft_threshold(v, thr) / shrink).max(l).min(h))
            }
            Resolved::Custom { term, weight } => {
                let step = if term.is_indicator() { t } else { t * weight };
                term.prox(y, step)
                    .expect("custom term advertised a proximal map but returned none")
            }
        }
    }
}
