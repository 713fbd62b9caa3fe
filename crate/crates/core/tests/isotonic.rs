use hotspot_core::evaluate::{isotonic_fit, isotonic_regression};
use proptest::prelude::*;

/// Best non-decreasing fit by enumerating every split into contiguous blocks.
/// The optimum is piecewise constant at block means, so this is exact.
fn exhaustive(y: &[f64], w: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        let mut last = f64::NEG_INFINITY;
        let mut ok = true;
        for i in 0..n {
            if i == n - 1 || mask & (1 << i) != 0 {
                let sw: f64 = w[start..=i].iter().sum();
                let m = (start..=i).map(|k| w[k] * y[k]).sum::<f64>() / sw;
                if m < last - 1e-12 {
                    ok = false;
                    break;
                }
                last = m;
                fit.extend(std::iter::repeat_n(m, i + 1 - start));
                start = i + 1;
            }
        }
        if !ok {
            continue;
        }
        let sse: f64 = (0..n).map(|k| w[k] * (y[k] - fit[k]).powi(2)).sum();
        if best.as_ref().is_none_or(|b| sse < b.1) {
            best = Some((fit, sse));
        }
    }
    best.expect("a single block is always monotone")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pava_matches_exhaustive_search(
        data in prop::collection::vec((-5.0..5.0f64, 0.1..3.0f64), 1..=12),
    ) {
        let y: Vec<f64> = data.iter().map(|d| d.0).collect();
        let w: Vec<f64> = data.iter().map(|d| d.1).collect();
        let got = isotonic_regression(&y, &w);
        let (want, _) = exhaustive(&y, &w);
        for (g, e) in got.iter().zip(&want) {
            prop_assert!((g - e).abs() <= 1e-10, "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn fitted_map_is_monotone_and_bounded(
        pairs in prop::collection::vec((0.0..1.0f64, any::<bool>()), 2..200),
        probes in prop::collection::vec(-0.5..1.5f64, 2..50),
    ) {
        let s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let m = isotonic_fit(&s, &b).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let out: Vec<f64> = probes.iter().map(|&h| m.apply(h)).collect();
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
