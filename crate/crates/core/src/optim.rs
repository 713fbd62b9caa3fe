//! Box-constrained L-BFGS for small, smooth problems (the GP hyperparameters).
//!
//! Bounds are handled by projection: trial points are clipped into the box and
//! search-direction components that would leave an active bound are zeroed.

use crate::error::{Error, Result};
use crate::math;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's ∞-norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers the objective by less than this
    /// fraction of `max(|f|, 1)`. Zero disables the test.
    pub rel_tol: f64,
}

/// Objective whose gradient is requested only at accepted points.
pub(crate) trait Objective {
    /// Value at `x`, or an error where the objective is undefined.
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    /// Gradient at the point of the most recent successful `value` call.
    fn gradient(&mut self) -> Result<Vec<f64>>;
}

#[cfg(test)]
struct Smooth<F> {
    f: F,
    grad: Vec<f64>,
}

#[cfg(test)]
impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Objective for Smooth<F> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let (v, g) = (self.f)(x)?;
        self.grad = g;
        Ok(v)
    }

    fn gradient(&mut self) -> Result<Vec<f64>> {
        Ok(self.grad.clone())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| if (xi <= l && gi > 0.0) || (xi >= h && gi < 0.0) { 0.0 } else { gi })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(math::abs(*x)))
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient, or an error
/// for points where it cannot be evaluated (treated as +∞ by the line search).
#[cfg(test)]
pub(crate) fn minimize<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    minimize_objective(&mut Smooth { f, grad: Vec::new() }, x0, lo, hi, opts)
}

pub(crate) fn minimize_objective<O: Objective>(
    f: &mut O,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &LbfgsOptions,
) -> Result<Minimum> {
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut fx = f.value(&x)?;
    if !fx.is_finite() {
        return Err(Error::Numerical(alloc::format!("objective is {fx} at the starting point")));
    }
    let mut g = f.gradient()?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    loop {
        let pg = projected_gradient(&x, &g, lo, hi);
        if inf_norm(&pg) < opts.grad_tol {
            return Ok(Minimum { x, value: fx, iterations, converged: true });
        }
        if iterations >= opts.max_iter {
            return Ok(Minimum { x, value: fx, iterations, converged: false });
        }
        iterations += 1;

        // Two-loop recursion on the projected gradient.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * vdot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = vdot(s, y) / vdot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * vdot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        for i in 0..n {
            if pg[i] == 0.0 {
                d[i] = 0.0;
            }
        }
        if vdot(&d, &pg) >= 0.0 {
            history.clear();
            d = pg.iter().map(|v| -v).collect();
        }

        let mut step = if history.is_empty() { (1.0 / inf_norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..50 {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            clamp(&mut xt);
            let moved: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            if inf_norm(&moved) == 0.0 {
                break;
            }
            if let Ok(ft) = f.value(&xt) {
                if ft.is_finite() && ft <= fx + 1e-4 * vdot(&g, &moved) {
                    accepted = Some((xt, ft, f.gradient()?, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt, s)) = accepted else {
            // No decrease possible along the search direction: at precision limit.
            let converged = inf_norm(&projected_gradient(&x, &g, lo, hi)) < opts.grad_tol;
            return Ok(Minimum { x, value: fx, iterations, converged });
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = vdot(&s, &y);
        if sy > 1e-12 * math::sqrt(vdot(&s, &s) * vdot(&y, &y)) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        if opts.rel_tol > 0.0 && decrease <= opts.rel_tol * math::abs(fx).max(1.0) {
            return Ok(Minimum { x, value: fx, iterations, converged: true });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const OPTS: LbfgsOptions = LbfgsOptions { memory: 6, max_iter: 200, grad_tol: 1e-8, rel_tol: 0.0 };

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let inf = f64::INFINITY;
        let m = minimize(f, &[-1.2, 1.0], &[-inf, -inf], &[inf, inf], &LbfgsOptions { max_iter: 500, ..OPTS }).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn active_bound() {
        // min (x - 3)^2 + (y + 1)^2 on [0, 2] x [0, 2] -> (2, 0)
        let f = |x: &[f64]| Ok(((x[0] - 3.0) * (x[0] - 3.0) + (x[1] + 1.0) * (x[1] + 1.0), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
        let m = minimize(f, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 2.0], &OPTS).unwrap();
        assert!(m.converged);
        assert_eq!(m.x, vec![2.0, 0.0]);
    }
}
