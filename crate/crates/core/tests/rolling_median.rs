use hotspot_core::normalize::{rolling_baseline, NormalizationConfig};
use hotspot_core::time::Timestamp;
use proptest::prelude::*;

/// Sorts every window from scratch.
fn naive(times: &[Timestamp], values: &[f64], window_ms: i64) -> Vec<f64> {
    times
        .iter()
        .map(|t| {
            let mut w: Vec<f64> = times
                .iter()
                .zip(values)
                .filter(|(s, _)| (0..=window_ms).contains(&(t.millis() - s.millis())))
                .map(|(_, v)| *v)
                .collect();
            w.sort_by(f64::total_cmp);
            let n = w.len();
            if n % 2 == 1 { w[n / 2] } else { (w[n / 2 - 1] + w[n / 2]) / 2.0 }
        })
        .collect()
}

proptest! {
    #[test]
    fn streaming_equals_naive(
        data in prop::collection::vec((0i64..7_200, 0u32..40), 1..300),
        window in prop::sample::select(vec![1.0, 5.0, 15.0, 30.0]),
    ) {
        let times: Vec<Timestamp> = data.iter().map(|d| Timestamp::from_seconds(d.0)).collect();
        // Coarse values force ties inside windows.
        let values: Vec<f64> = data.iter().map(|d| d.1 as f64 * 0.5).collect();
        let cfg = NormalizationConfig { window_minutes: window };
        let got = rolling_baseline(&times, &values, &cfg).unwrap();
        prop_assert_eq!(got, naive(&times, &values, cfg.window_millis()));
    }

    #[test]
    fn constant_series_normalizes_to_zero(n in 1usize..200, v in 0.0..300.0f64) {
        let times: Vec<Timestamp> = (0..n as i64).map(|i| Timestamp::from_seconds(i * 37 % 5_000)).collect();
        let base = rolling_baseline(&times, &vec![v; n], &NormalizationConfig::default()).unwrap();
        prop_assert!(base.iter().all(|b| *b == v));
    }
}
