//! GP fits and log marginal likelihood checked against a dense nalgebra solve.

use hotspot_core::ensemble::{fit_ensemble, EnsembleConfig, SamplingWeights, TrainingSet};
use hotspot_core::gp::{kernel, log_marginal_likelihood, GpModel, KernelParams, Norm};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let x: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)]).collect();
    let y: Vec<f64> = x.iter().map(|p| (p[0] / 90.0).sin() * 4.0 + p[1] / 200.0 + rng.random_range(-0.5..0.5)).collect();
    (x, y)
}

struct Dense {
    mean: Vec<f64>,
    variance: Vec<f64>,
    lml: f64,
}

fn dense(x: &[[f64; 2]], y: &[f64], q: &[[f64; 2]], p: &KernelParams, norm: Norm) -> Dense {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], p, norm) + if i == j { p.noise } else { 0.0 });
    let chol = k.clone().cholesky().expect("positive definite");
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let mut mean = Vec::new();
    let mut variance = Vec::new();
    for qi in q {
        let ks = DVector::from_fn(n, |i, _| kernel(&x[i], qi, p, norm));
        mean.push(ks.dot(&alpha));
        variance.push(p.variance - ks.dot(&chol.solve(&ks)));
    }
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * yv.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Dense { mean, variance, lml }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn lml_matches_dense_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for norm in [Norm::L1, Norm::L2] {
        for _ in 0..10 {
            let n = rng.random_range(2..60);
            let (x, y) = random_problem(&mut rng, n);
            let p = KernelParams {
                variance: rng.random_range(0.5..10.0),
                lengthscale: rng.random_range(20.0..400.0),
                noise: rng.random_range(0.05..2.0),
            };
            let ours = log_marginal_likelihood(&x, &y, &p, norm).unwrap();
            let d = dense(&x, &y, &[], &p, norm);
            assert!(rel(ours.value, d.lml) < 1e-10, "{} vs {}", ours.value, d.lml);
            assert_eq!(ours.jitter, 0.0);
        }
    }
}

#[test]
fn fixed_parameter_posterior_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (x, y) = random_problem(&mut rng, 80);
    let p = KernelParams { variance: 3.0, lengthscale: 150.0, noise: 0.3 };
    let q: Vec<[f64; 2]> = (0..25).map(|_| [rng.random_range(-50.0..550.0), rng.random_range(-50.0..550.0)]).collect();
    let model = GpModel::with_params(&x, &y, p, Norm::L1).unwrap();
    let d = dense(&x, &y, &q, &p, Norm::L1);
    for (i, qi) in q.iter().enumerate() {
        let pr = model.predict(qi);
        assert!((pr.mean - d.mean[i]).abs() <= 1e-9 * d.mean[i].abs().max(1.0));
        assert!(rel(pr.variance, d.variance[i]) < 1e-8);
    }
}

#[test]
fn single_full_member_reproduces_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..5 {
        let n = rng.random_range(10..120);
        let (x, y) = random_problem(&mut rng, n);
        let set = TrainingSet { coords: x.clone(), y: y.clone(), tiles: (0..n).map(|i| i % 7).collect() };
        let cfg = EnsembleConfig {
            models: 1,
            subsample: n,
            weights: SamplingWeights::UNIFORM,
            seed: trial,
            ..Default::default()
        };
        let ens = fit_ensemble(&set, &cfg).unwrap();
        let member = &ens.members()[0];
        let q: Vec<[f64; 2]> = (0..10).map(|_| [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)]).collect();
        let d = dense(&x, &y, &q, &member.params(), member.norm());
        for (i, qi) in q.iter().enumerate() {
            let pr = ens.predict(qi);
            assert!(rel(pr.mean, d.mean[i]) < 1e-8 || (pr.mean - d.mean[i]).abs() < 1e-10);
            assert!(rel(pr.variance, d.variance[i]) < 1e-8);
        }
    }
}
