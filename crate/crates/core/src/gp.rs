//! Exponential-kernel Gaussian-process regression with a zero prior mean.
//!
//! The covariance is `k(a, b) = σ_k² · exp(-‖a - b‖ / ℓ)` with the L1 norm
//! by default, plus i.i.d. Gaussian observation noise `σ_ε²`. Hyperparameters
//! are fitted by maximizing the log marginal likelihood over log-parameters
//! with box-constrained L-BFGS and a few deterministic restarts.

use crate::error::{domain, Error, Result};
use crate::linalg::{packed_len, row_start, Cholesky};
use crate::math;
use crate::optim::{self, LbfgsOptions};
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Distance used inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Norm {
    /// Manhattan distance.
    #[default]
    L1,
    /// Euclidean distance.
    L2,
}

impl Norm {
    #[inline]
    pub fn distance(self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        match self {
            Norm::L1 => math::abs(dx) + math::abs(dy),
            Norm::L2 => math::sqrt(dx * dx + dy * dy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelParams {
    /// Kernel variance σ_k².
    pub variance: f64,
    /// Lengthscale ℓ, in the units of the input coordinates.
    pub lengthscale: f64,
    /// Observation noise variance σ_ε².
    pub noise: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("variance", self.variance), ("lengthscale", self.lengthscale), ("noise", self.noise)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain!("kernel {name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    fn to_log(self) -> [f64; 3] {
        [math::ln(self.variance), math::ln(self.lengthscale), math::ln(self.noise)]
    }

    fn from_log(v: &[f64]) -> Self {
        KernelParams { variance: math::exp(v[0]), lengthscale: math::exp(v[1]), noise: math::exp(v[2]) }
    }
}

pub fn kernel(a: &[f64; 2], b: &[f64; 2], params: &KernelParams, norm: Norm) -> f64 {
    params.variance * math::exp(-norm.distance(a, b) / params.lengthscale)
}

/// Log marginal likelihood and its gradient with respect to
/// `(log σ_k², log ℓ, log σ_ε²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub gradient: [f64; 3],
    /// Diagonal jitter that had to be added for the factorization to succeed.
    pub jitter: f64,
}

/// Jitter ladder, as multiples of σ_k²; the first rung is no jitter.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Training inputs with their pairwise distances cached.
struct Problem<'a> {
    y: &'a [f64],
    dist: Vec<f64>,
}

struct Factored {
    chol: Cholesky,
    alpha: Vec<f64>,
    jitter: f64,
}

impl<'a> Problem<'a> {
    fn new(x: &[[f64; 2]], y: &'a [f64], norm: Norm) -> Result<Self> {
        if x.len() != y.len() {
            return Err(domain!("{} inputs but {} targets", x.len(), y.len()));
        }
        if x.is_empty() {
            return Err(domain!("no training data"));
        }
        if let Some(v) = y.iter().chain(x.iter().flatten()).find(|v| !v.is_finite()) {
            return Err(domain!("non-finite training value {v}"));
        }
        let n = x.len();
        let mut dist = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                dist.push(norm.distance(&x[i], &x[j]));
            }
        }
        Ok(Problem { y, dist })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    /// Packed `σ_k² exp(-d/ℓ)`.
    fn signal_cov(&self, p: &KernelParams) -> Vec<f64> {
        let inv_l = 1.0 / p.lengthscale;
        self.dist.iter().map(|d| p.variance * math::exp(-d * inv_l)).collect()
    }

    fn factor(&self, p: &KernelParams, kf: &[f64]) -> Result<Factored> {
        let n = self.n();
        let mut last_pivot = 0;
        for rung in JITTER_LADDER {
            let jitter = rung * p.variance;
            let mut a = kf.to_vec();
            for i in 0..n {
                a[row_start(i) + i] += p.noise + jitter;
            }
            match Cholesky::factor(n, a) {
                Ok(chol) => {
                    if jitter > 0.0 {
                        log::warn!("kernel matrix needed jitter {jitter:e} (n = {n}, params {p:?})");
                    }
                    let alpha = chol.solve(self.y);
                    return Ok(Factored { chol, alpha, jitter });
                }
                Err(pivot) => last_pivot = pivot,
            }
        }
        Err(Error::Numerical(alloc::format!(
            "kernel matrix not positive definite at pivot {last_pivot} even with jitter {:e} (params {p:?})",
            JITTER_LADDER[JITTER_LADDER.len() - 1] * p.variance
        )))
    }

    /// Value of the log marginal likelihood, with what the gradient needs.
    fn value(&self, p: &KernelParams) -> Result<(f64, Vec<f64>, Factored)> {
        let n = self.n();
        let kf = self.signal_cov(p);
        let f = self.factor(p, &kf)?;
        let fit_term: f64 = self.y.iter().zip(&f.alpha).map(|(y, a)| y * a).sum();
        let value = -0.5 * fit_term - f.chol.half_log_det() - 0.5 * n as f64 * math::ln(2.0 * PI);
        Ok((value, kf, f))
    }

    /// Gradient with respect to `(ln σ_k², ln ℓ, ln σ_ε²)`.
    fn gradient(&self, p: &KernelParams, kf: &[f64], f: &Factored) -> [f64; 3] {
        let n = self.n();
        let inv = f.chol.inverse_packed();
        let inv_l = 1.0 / p.lengthscale;
        let (mut g_var, mut g_len, mut g_noise) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let base = row_start(i);
            let ai = f.alpha[i];
            for j in 0..i {
                let w = ai * f.alpha[j] - inv[base + j];
                let k = kf[base + j];
                g_var += w * k;
                g_len += w * k * self.dist[base + j];
            }
            let w = ai * ai - inv[base + i];
            // Off-diagonal terms count twice; halve the diagonal instead.
            g_var += 0.5 * w * kf[base + i];
            g_noise += w;
        }
        [g_var, g_len * inv_l, 0.5 * p.noise * g_noise]
    }

    fn evaluate(&self, p: &KernelParams, with_gradient: bool) -> Result<(LogLikelihood, Factored)> {
        let (value, kf, f) = self.value(p)?;
        let gradient = if with_gradient { self.gradient(p, &kf, &f) } else { [0.0; 3] };
        Ok((LogLikelihood { value, gradient, jitter: f.jitter }, f))
    }
}

/// Negative log marginal likelihood over log-parameters, keeping the last
/// factorization so the gradient costs no second factorization.
struct NegLml<'p, 'a> {
    problem: &'p Problem<'a>,
    last: Option<(KernelParams, Vec<f64>, Factored)>,
}

impl optim::Objective for NegLml<'_, '_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let p = KernelParams::from_log(x);
        let (v, kf, f) = self.problem.value(&p)?;
        self.last = Some((p, kf, f));
        Ok(-v)
    }

    fn gradient(&mut self) -> Result<Vec<f64>> {
        let (p, kf, f) = self.last.as_ref().ok_or_else(|| Error::Numerical("gradient requested before value".into()))?;
        Ok(self.problem.gradient(p, kf, f).iter().map(|g| -g).collect())
    }
}

/// Log marginal likelihood of `y` under the GP prior with `params`.
pub fn log_marginal_likelihood(x: &[[f64; 2]], y: &[f64], params: &KernelParams, norm: Norm) -> Result<LogLikelihood> {
    params.validate()?;
    let problem = Problem::new(x, y, norm)?;
    Ok(problem.evaluate(params, true)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitOptions {
    pub norm: Norm,
    /// Number of optimizer starts (at least one).
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the ∞-norm of the log-parameter gradient.
    pub grad_tol: f64,
    /// Also stop once a step improves the objective by less than this
    /// fraction of its magnitude. Zero (the default) disables the test.
    pub rel_tol: f64,
    /// Variance bounds as multiples of the initial kernel variance.
    pub variance_bounds: (f64, f64),
    /// Lengthscale bounds as multiples of the initial lengthscale.
    pub lengthscale_bounds: (f64, f64),
    /// Noise bounds as multiples of the initial kernel variance.
    pub noise_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            norm: Norm::L1,
            restarts: 3,
            max_iter: 200,
            grad_tol: 1e-6,
            rel_tol: 0.0,
            variance_bounds: (1e-6, 1e4),
            lengthscale_bounds: (1e-3, 1e3),
            noise_bounds: (1e-6, 1e4),
        }
    }
}

/// Data-driven starting point: ℓ₀ is the median pairwise distance over a
/// strided subsample of at most 500 inputs, σ_k²₀ = var(y), σ_ε²₀ = 0.1 var(y).
/// Degenerate data (constant `y`, coincident inputs) fall back to 1.
pub fn initial_params(x: &[[f64; 2]], y: &[f64], norm: Norm) -> KernelParams {
    const SUBSAMPLE: usize = 500;
    let n = x.len();
    let picks: Vec<&[f64; 2]> = if n <= SUBSAMPLE {
        x.iter().collect()
    } else {
        (0..SUBSAMPLE).map(|k| &x[k * n / SUBSAMPLE]).collect()
    };
    let mut d = Vec::with_capacity(picks.len() * picks.len().saturating_sub(1) / 2);
    for i in 0..picks.len() {
        for j in 0..i {
            d.push(norm.distance(picks[i], picks[j]));
        }
    }
    let lengthscale = match crate::stats::median_in_place(&mut d) {
        Some(m) if m > 0.0 && m.is_finite() => m,
        _ => 1.0,
    };
    let variance = match crate::stats::variance(y) {
        Some(v) if v > 0.0 && v.is_finite() => v,
        _ => 1.0,
    };
    KernelParams { variance, lengthscale, noise: 0.1 * variance }
}

/// Log-space offsets of the restart points relative to the initial point.
const RESTART_OFFSETS: [[f64; 3]; 5] =
    [[0.0, 0.0, 0.0], [0.0, -1.6, 1.6], [0.0, 1.6, -1.6], [0.7, -0.7, 0.0], [-0.7, 0.7, 0.0]];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub failed_restarts: usize,
    pub jitter: f64,
}

/// A fitted GP: hyperparameters plus the factorized training system.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    norm: Norm,
    x: Vec<[f64; 2]>,
    chol: Cholesky,
    alpha: Vec<f64>,
    lml: f64,
    diagnostics: FitDiagnostics,
}

/// Posterior of the latent function at one point (noise excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl GpModel {
    /// Conditions on the training data with fixed hyperparameters.
    pub fn with_params(x: &[[f64; 2]], y: &[f64], params: KernelParams, norm: Norm) -> Result<Self> {
        params.validate()?;
        let problem = Problem::new(x, y, norm)?;
        let (ll, f) = problem.evaluate(&params, false)?;
        Ok(GpModel {
            params,
            norm,
            x: x.to_vec(),
            chol: f.chol,
            alpha: f.alpha,
            lml: ll.value,
            diagnostics: FitDiagnostics { jitter: f.jitter, converged: true, ..Default::default() },
        })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Weights `(K + σ_ε² I)⁻¹ y`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Entry `(i, j)`, `j <= i`, of the lower Cholesky factor of the training
    /// covariance.
    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        assert!(j <= i && i < self.chol.dim());
        self.chol.entry(i, j)
    }

    pub fn predict(&self, q: &[f64; 2]) -> Prediction {
        let mut k: Vec<f64> = self.x.iter().map(|xi| kernel(xi, q, &self.params, self.norm)).collect();
        let mean = crate::linalg::dot(&k, &self.alpha);
        self.chol.solve_lower_in_place(&mut k);
        let explained = crate::linalg::dot(&k, &k);
        Prediction { mean, variance: (self.params.variance - explained).max(0.0) }
    }

    pub fn predict_many(&self, queries: &[[f64; 2]]) -> Vec<Prediction> {
        queries.iter().map(|q| self.predict(q)).collect()
    }
}

/// Maximizes the log marginal likelihood from `init` (and restarts around it)
/// and returns the best model.
pub fn fit(x: &[[f64; 2]], y: &[f64], init: &KernelParams, opts: &FitOptions) -> Result<GpModel> {
    init.validate()?;
    if x.len() < 2 {
        return Err(domain!("need at least two training points, got {}", x.len()));
    }
    let problem = Problem::new(x, y, opts.norm)?;
    let base = init.to_log();
    let s = math::ln(init.variance);
    let lo = [
        s + math::ln(opts.variance_bounds.0),
        base[1] + math::ln(opts.lengthscale_bounds.0),
        s + math::ln(opts.noise_bounds.0),
    ];
    let hi = [
        s + math::ln(opts.variance_bounds.1),
        base[1] + math::ln(opts.lengthscale_bounds.1),
        s + math::ln(opts.noise_bounds.1),
    ];
    let lbfgs = LbfgsOptions { memory: 8, max_iter: opts.max_iter, grad_tol: opts.grad_tol, rel_tol: opts.rel_tol };

    let mut best: Option<(f64, Vec<f64>, usize, bool)> = None;
    let mut failures = Vec::new();
    for r in 0..opts.restarts.max(1) {
        let off = RESTART_OFFSETS[r % RESTART_OFFSETS.len()];
        let scale = 1.0 + (r / RESTART_OFFSETS.len()) as f64;
        let start: Vec<f64> = (0..3).map(|i| base[i] + scale * off[i]).collect();
        let mut objective = NegLml { problem: &problem, last: None };
        match optim::minimize_objective(&mut objective, &start, &lo, &hi, &lbfgs) {
            Ok(m) => {
                let lml = -m.value;
                if best.as_ref().map_or(true, |b| lml > b.0) {
                    best = Some((lml, m.x, m.iterations, m.converged));
                }
            }
            Err(e) => failures.push(e),
        }
    }
    let Some((_, v, iterations, converged)) = best else {
        return Err(Error::Numerical(alloc::format!(
            "all {} optimizer starts failed; first error: {}",
            failures.len(),
            failures[0]
        )));
    };
    let params = KernelParams::from_log(&v);
    let (ll, f) = problem.evaluate(&params, false)?;
    if !converged {
        log::debug!("GP fit stopped after {iterations} iterations without meeting the gradient tolerance");
    }
    Ok(GpModel {
        params,
        norm: opts.norm,
        x: x.to_vec(),
        chol: f.chol,
        alpha: f.alpha,
        lml: ll.value,
        diagnostics: FitDiagnostics { iterations, converged, failed_restarts: failures.len(), jitter: f.jitter },
    })
}
