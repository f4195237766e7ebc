//! Quasi-Newton ascent with numerical gradients. The objective is anything
//! that maps a parameter vector to a value, returning -∞ (or NaN) where it is
//! undefined; the optimizer only ever moves to points it has evaluated.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math::sqrt;

pub struct MaximizeOptions {
    /// Stop when the gradient sup-norm falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Relative central-difference step for the gradient.
    pub fd_step: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions { grad_tol: 1e-8, max_iters: 60, fd_step: 1e-5 }
    }
}

pub struct MaximizeOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub n_iters: usize,
    /// Gradient tolerance was met. When false the run stopped on the
    /// iteration cap or because no uphill step could be found.
    pub converged: bool,
    /// Whether any strictly uphill move from the start was found.
    pub improved: bool,
    /// Final inverse-Hessian approximation of the negated objective, useful
    /// as a warm start for a nearby problem.
    pub h_inv: Matrix,
}

/// Central-difference gradient with per-coordinate step `rel·(1 + |xⱼ|)`.
pub fn numerical_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], rel: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut work = x.to_vec();
    for j in 0..x.len() {
        let h = rel * (1.0 + x[j].abs());
        work[j] = x[j] + h;
        let up = f(&work);
        work[j] = x[j] - h;
        let down = f(&work);
        work[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

/// BFGS ascent from `x0`. `h0` warm-starts the inverse Hessian (of the
/// negated objective); pass `None` for a scaled identity.
pub fn maximize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    h0: Option<Matrix>,
    opts: &MaximizeOptions,
) -> MaximizeOutcome {
    let n = x0.len();
    let clean = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut x = x0.to_vec();
    let mut fx = clean(f(&x));
    let mut improved = false;

    if fx == f64::NEG_INFINITY {
        // nowhere to start from; report the input point as-is
        return MaximizeOutcome {
            x,
            f: fx,
            grad_norm: f64::INFINITY,
            n_iters: 0,
            converged: false,
            improved,
            h_inv: h0.unwrap_or_else(|| Matrix::identity(n)),
        };
    }

    let mut grad = numerical_gradient(|v| clean(f(v)), &x, opts.fd_step);
    let mut h = h0.unwrap_or_else(|| Matrix::identity(n));
    let mut n_iters = 0;
    let mut converged = false;

    for _ in 0..opts.max_iters {
        let gnorm = sup_norm(&grad);
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }

        // ascent direction d = H·grad (H approximates the inverse of the
        // negated Hessian, which is positive definite near a maximum)
        let mut d = h.mul_vec(&grad);
        let mut slope: f64 = d.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) || d.iter().any(|v| !v.is_finite()) {
            h = Matrix::identity(n);
            d = grad.clone();
            slope = grad.iter().map(|g| g * g).sum();
            if !(slope > 0.0) {
                break;
            }
        }

        // backtracking line search on the Armijo condition
        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let ft = clean(f(&trial));
            if ft >= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no uphill step along d; with a fresh identity metric this means
            // the gradient direction itself is numerically flat, so stop
            break;
        };
        n_iters += 1;
        improved = improved || f_new > fx;

        let grad_new = numerical_gradient(|v| clean(f(v)), &x_new, opts.fd_step);
        // BFGS update in minimization convention: s = step, yv = -(Δgrad)
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad.iter().zip(&grad_new).map(|(old, new)| old - new).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let s_len: f64 = s.iter().map(|v| v * v).sum::<f64>();
        let y_len: f64 = yv.iter().map(|v| v * v).sum::<f64>();
        if sy > 1e-10 * sqrt(s_len * y_len + 1e-300) {
            bfgs_update(&mut h, &s, &yv, sy);
        }

        let f_gain = f_new - fx;
        x = x_new;
        fx = f_new;
        grad = grad_new;
        if f_gain.abs() <= 1e-13 * (1.0 + fx.abs()) {
            // objective resolution exhausted
            converged = sup_norm(&grad) <= opts.grad_tol;
            break;
        }
    }

    MaximizeOutcome { grad_norm: sup_norm(&grad), x, f: fx, n_iters, converged, improved, h_inv: h }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &a| m.max(a.abs()))
}

/// H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ with ρ = 1/(sᵀy).
fn bfgs_update(h: &mut Matrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = h.mul_vec(y);
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            let term = -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
            h[(i, j)] += term;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn maximizes_a_concave_quadratic_exactly() {
        // f(x) = -(x-a)ᵀ A (x-a)/2 with known argmax a
        let a = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| {
            let d0 = x[0] - a[0];
            let d1 = x[1] - a[1];
            let d2 = x[2] - a[2];
            -(2.0 * d0 * d0 + 1.0 * d1 * d1 + 0.5 * d2 * d2 + 0.6 * d0 * d1)
        };
        let out = maximize(f, &[0.0, 0.0, 0.0], None, &MaximizeOptions::default());
        for (got, want) in out.x.iter().zip(a) {
            assert_relative_eq!(*got, want, epsilon = 1e-6);
        }
        assert!(out.improved);
    }

    #[test]
    fn never_returns_a_worse_point_than_the_start() {
        // objective with a kink that defeats the quadratic model
        let f = |x: &[f64]| -(x[0].abs() + 1.0) * (1.0 + 0.1 * (x[0] * 7.0).sin().abs());
        let out = maximize(f, &[0.3], None, &MaximizeOptions::default());
        assert!(out.f >= f(&[0.3]));
    }

    #[test]
    fn handles_undefined_regions_as_negative_infinity() {
        // objective undefined left of x = -1
        let f = |x: &[f64]| {
            if x[0] < -1.0 {
                f64::NAN
            } else {
                -(x[0] - 5.0) * (x[0] - 5.0)
            }
        };
        let out = maximize(f, &[-0.9], None, &MaximizeOptions::default());
        assert_relative_eq!(out.x[0], 5.0, epsilon = 1e-5);
    }

    #[test]
    fn warm_started_metric_speeds_up_a_repeat_solve() {
        let f = |x: &[f64]| {
            let d0 = x[0] - 2.0;
            let d1 = x[1] + 1.0;
            -(30.0 * d0 * d0 + 0.1 * d1 * d1)
        };
        let cold = maximize(f, &[0.0, 0.0], None, &MaximizeOptions::default());
        let warm = maximize(f, &[0.1, 0.1], Some(cold.h_inv.clone()), &MaximizeOptions::default());
        assert!(warm.n_iters <= cold.n_iters);
        assert_relative_eq!(warm.x[0], 2.0, epsilon = 1e-5);
    }
}
