//! Small dense linear-algebra kernels used by the Lipschitz calculators and
//! the reference oracles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Relative tolerance on the Rayleigh quotient for power iteration.
pub const POWER_TOLERANCE: f64 = 1e-12;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITERS: usize = 10_000;

pub fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

pub fn distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn norm_l1(x: ArrayView1<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Deterministic start vector for power iteration: not orthogonal to any
/// coordinate axis and free of simple symmetries.
fn start_vector(n: usize) -> Array1<f64> {
    const GOLDEN: f64 = 0.754_877_666_246_692_7;
    let v = Array1::from_iter((0..n).map(|i| 1.0 + ((i as f64 + 1.0) * GOLDEN).fract()));
    let nv = norm(v.view());
    v / nv
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its action `apply`, by power iteration.
pub fn power_iteration(n: usize, apply: impl Fn(ArrayView1<f64>) -> Array1<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(v.view());
        let next = v.dot(&w);
        let nw = norm(w.view());
        if nw == 0.0 {
            return 0.0;
        }
        v = w / nw;
        if (next - lambda).abs() <= POWER_TOLERANCE * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Rayleigh quotient at the final unit vector
    let w = apply(v.view());
    lambda.max(v.dot(&w))
}

/// λ_max(AᵀA) without forming the Gram matrix.
pub fn gram_lambda_max(a: ArrayView2<f64>) -> f64 {
    power_iteration(a.ncols(), |v| a.t().dot(&a.dot(&v)))
}

/// Largest and smallest eigenvalues of a symmetric PSD matrix. The smallest
/// comes from power iteration on the shifted operator `λ_max I − Q`.
pub fn symmetric_extreme_eigenvalues(q: ArrayView2<f64>) -> (f64, f64) {
    let n = q.nrows();
    let lmax = power_iteration(n, |v| q.dot(&v));
    let shifted = power_iteration(n, |v| &v * lmax - q.dot(&v));
    (lmax, (lmax - shifted).max(0.0))
}

/// Conjugate gradient on the normal equations (CGLS) started at zero, which
/// converges to the minimum-norm least-squares solution. Stops once
/// `||Aᵀ(b − Ax)|| ≤ tol · (1 + ||Aᵀb||)` or after `max_iters` steps.
pub fn cgls(a: ArrayView2<f64>, b: ArrayView1<f64>, tol: f64, max_iters: usize) -> Array1<f64> {
    let n = a.ncols();
    let mut x = Array1::<f64>::zeros(n);
    let mut r = b.to_owned();
    let mut s = a.t().dot(&r);
    let threshold = tol * (1.0 + norm(s.view()));
    let mut p = s.clone();
    let mut gamma = s.dot(&s);
    for _ in 0..max_iters {
        if gamma.sqrt() <= threshold {
            break;
        }
        let q = a.dot(&p);
        let qq = q.dot(&q);
        if qq == 0.0 {
            break;
        }
        let step = gamma / qq;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &q);
        s = a.t().dot(&r);
        let gamma_next = s.dot(&s);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        p = &s + &(p * beta);
    }
    x
}

/// Row-major dense matrix from nested slices; convenience for tests and
/// small fixtures.
pub fn matrix(rows: &[&[f64]]) -> Array2<f64> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((m, n), |(i, j)| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn power_iteration_on_diagonal() {
        let q = Array2::from_diag(&array![1.0, 9.0, 4.0]);
        let (lmax, lmin) = symmetric_extreme_eigenvalues(q.view());
        assert_relative_eq!(lmax, 9.0, max_relative = 1e-10);
        assert_relative_eq!(lmin, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn zero_operator() {
        let a = Array2::<f64>::zeros((3, 2));
        assert_eq!(gram_lambda_max(a.view()), 0.0);
    }

    #[test]
    fn cgls_min_norm_on_underdetermined_line() {
        let a = matrix(&[&[1.0, 1.0]]);
        let x = cgls(a.view(), array![2.0].view(), 1e-13, 100);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
    }
}
