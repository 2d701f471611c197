//! Box-constrained Levenberg–Marquardt least squares.
//!
//! Minimizes `Σ r_i(x)²` with `lower ≤ x ≤ upper`. Steps are solved on the
//! free variables only (a variable sitting on a bound whose gradient points
//! outward is frozen for that iteration) and then projected onto the box.
//! Marquardt's diagonal scaling makes the damping invariant to the units of
//! each parameter.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative decrease of the cost below which the search stops.
    pub ftol: f64,
    /// Relative step length below which the search stops.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 500, ftol: 1e-10, xtol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub n_iter: usize,
    pub converged: bool,
}

/// Forward-difference step for coordinate `x`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.sqrt() * x.abs().max(1.0)
}

/// Forward-difference Jacobian of `f` at `x`, stepping inward at the upper bound.
///
/// Returns `None` when `f` cannot be evaluated at a displaced point.
pub fn forward_jacobian<F>(f: &F, x: &[f64], r0: &[f64], upper: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let mut h = fd_step(x[j]);
        if x[j] + h > upper[j] {
            h = -h;
        }
        xp[j] = x[j] + h;
        let r = f(&xp)?;
        xp[j] = x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (r[i] - r0[i]) / h;
        }
    }
    Some(jac)
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Runs the solver from `x0`. `f` returns `None` outside its domain, which
/// the search treats as an infinitely bad point.
pub fn minimize<F>(f: &F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LmOptions) -> Option<LmReport>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let mut r = f(&x)?;
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    if n == 0 {
        return Some(LmReport { x, cost, n_iter: 0, converged: true });
    }

    for iter in 1..=opts.max_iter {
        if cost == 0.0 {
            return Some(LmReport { x, cost, n_iter: iter - 1, converged: true });
        }
        let jac = forward_jacobian(f, &x, &r, upper)?;
        let rv = DVector::from_column_slice(&r);
        let grad = jac.tr_mul(&rv);
        let free: Vec<usize> = (0..n)
            .filter(|&j| !((x[j] <= lower[j] && grad[j] > 0.0) || (x[j] >= upper[j] && grad[j] < 0.0)))
            .collect();
        if free.is_empty() || free.iter().all(|&j| grad[j] == 0.0) {
            return Some(LmReport { x, cost, n_iter: iter, converged: true });
        }
        let jf = jac.select_columns(&free);
        let a = jf.tr_mul(&jf);
        let g = DVector::from_iterator(free.len(), free.iter().map(|&j| grad[j]));
        let diag: Vec<f64> = (0..free.len()).map(|k| a[(k, k)].max(1e-300)).collect();

        let accepted = loop {
            if lambda > 1e16 {
                break None;
            }
            let mut damped = a.clone();
            for (k, d) in diag.iter().enumerate() {
                damped[(k, k)] += lambda * d;
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let mut xn = x.clone();
            for (k, &j) in free.iter().enumerate() {
                xn[j] += step[k];
            }
            clamp(&mut xn, lower, upper);
            match f(&xn) {
                Some(rn) if cost_of(&rn) < cost => {
                    lambda = (lambda / 3.0).max(1e-12);
                    break Some((xn, rn));
                }
                _ => lambda *= 4.0,
            }
        };
        // No descent direction left at any damping: stationary to round-off.
        let Some((xn, rn)) = accepted else {
            return Some(LmReport { x, cost, n_iter: iter, converged: true });
        };
        let cost_new = cost_of(&rn);
        let dx: f64 = xn.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let xnorm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let small_f = cost - cost_new <= opts.ftol * cost;
        let small_x = dx <= opts.xtol * (xnorm + opts.xtol);
        x = xn;
        r = rn;
        cost = cost_new;
        if small_f || small_x {
            return Some(LmReport { x, cost, n_iter: iter, converged: true });
        }
    }
    Some(LmReport { x, cost, n_iter: opts.max_iter, converged: false })
}
