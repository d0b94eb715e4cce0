use ndarray::{Array1, Array2};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{augment_collinear, Dataset};
use crate::error::{Error, Result};
use crate::model::{BilevelInstance, ErrorBound, NonsmoothTerm, SmoothTerm};
use crate::penalty::{lf_elastic_net, lf_half_squared_norm_in_l1_ball};
use crate::reference::min_norm_least_squares;

/// Radius of the l1-ball constraint in the logistic problem.
pub const LRP_BALL_RADIUS: f64 = 10.0;
/// Ridge weight of the elastic-net upper level in the least-squares problem.
pub const ELASTIC_TAU: f64 = 0.02;

const LRP_LABEL_NOISE: f64 = 0.5;
const LSRP_TARGET_NOISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Minimum-norm solution of l1-constrained logistic regression.
    Lrp,
    /// Elastic-net selection among least-squares solutions.
    Lsrp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

fn gaussian(rng: &mut impl Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

/// Seeded synthetic instance and its dataset.
///
/// `lrp`: Gaussian features, labels `sign(aᵀw + 0.5·noise)`.
/// `lsrp`: Gaussian base features plus duplicates of the first `n/5` columns
/// and an intercept, `n` columns in total, targets `Aw + 0.1·noise`.
pub fn synth_instance(family: Family, rows: usize, cols: usize, seed: u64) -> Result<(BilevelInstance, Dataset)> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("synthetic sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dataset = match family {
        Family::Lrp => {
            let a = gaussian(&mut rng, (rows, cols));
            let w = gaussian_vec(&mut rng, cols);
            let noise = gaussian_vec(&mut rng, rows);
            let margin = a.dot(&w) + noise * LRP_LABEL_NOISE;
            let labels = margin.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            Dataset::from_dense(&a, labels)
        }
        Family::Lsrp => {
            if cols < 2 {
                return Err(Error::InvalidArgument("lsrp needs at least two columns".into()));
            }
            let copies = cols / 5;
            let base = cols - copies - 1;
            let a = gaussian(&mut rng, (rows, base));
            let augmented = augment_collinear(&Dataset::from_dense(&a, vec![0.0; rows]), copies, true)?;
            let full = augmented.to_dense();
            let w = gaussian_vec(&mut rng, cols);
            let noise = gaussian_vec(&mut rng, rows);
            let b = full.dot(&w) + noise * LSRP_TARGET_NOISE;
            Dataset { labels: b.to_vec(), ..augmented }
        }
    };
    Ok((instance_from_dataset(family, &dataset)?, dataset))
}

/// Builds the bilevel problem of `family` on a dataset.
///
/// `lrp`: `F = ½||x||²`, `G = logistic + I{||x||₁ ≤ 10}`, `l_F = 10`.
/// `lsrp`: `F = (τ/2)||x||² + ||x||₁`, `G = (1/2m)||Ax − b||²`, with `l_F`
/// from the bound `||x*||₂ ≤ ||x*||₁ ≤ F(x*) ≤ F(x_mn)` at the minimum-norm
/// least-squares solution `x_mn`. Both use quadratic growth with `ρ = 1`.
pub fn instance_from_dataset(family: Family, data: &Dataset) -> Result<BilevelInstance> {
    if data.rows == 0 || data.cols == 0 {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let a = data.to_dense();
    let b = data.labels();
    let error_bound = ErrorBound::new(2.0, 1.0)?;
    match family {
        Family::Lrp => BilevelInstance::new(
            data.cols,
            (SmoothTerm::half_squared_norm(1.0), NonsmoothTerm::zero()),
            (SmoothTerm::logistic(a, b), NonsmoothTerm::l1_ball(LRP_BALL_RADIUS)),
            error_bound,
            lf_half_squared_norm_in_l1_ball(LRP_BALL_RADIUS),
        ),
        Family::Lsrp => {
            let x_mn = min_norm_least_squares(a.view(), b.view());
            let f2 = NonsmoothTerm::l1_norm(1.0);
            let f1 = SmoothTerm::half_squared_norm(ELASTIC_TAU);
            let radius = f1.value(x_mn.view()) + f2.value(x_mn.view());
            BilevelInstance::new(
                data.cols,
                (f1, f2),
                (SmoothTerm::least_squares(a, b), NonsmoothTerm::zero()),
                error_bound,
                lf_elastic_net(ELASTIC_TAU, radius, data.cols),
            )
        }
    }
}
