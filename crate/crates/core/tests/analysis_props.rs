use std::collections::BTreeMap;

use blockplan::analysis::{bootstrap_compare, fit_effort_only, fit_full, fit_risk_only, zscore, zscore_and_average, HumanDataset};
use proptest::prelude::*;

fn columns() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (6usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(1.0f64..100.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn trial_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residuals_are_orthogonal_to_regressors((e, r, y) in columns()) {
        let f = fit_full(&e, &r, &y).unwrap();
        let res = f.residuals(&y);
        let scale = y.iter().map(|v| v.abs()).sum::<f64>() * e.iter().cloned().fold(1.0, f64::max);
        let ones = vec![1.0; y.len()];
        let e_safe: Vec<f64> = e.iter().zip(&r).map(|(e, r)| e * (1.0 - r)).collect();
        let e_risky: Vec<f64> = e.iter().zip(&r).map(|(e, r)| e * r).collect();
        for col in [&ones, &e_safe, &e_risky] {
            prop_assert!(dot(&res, col).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn full_model_nests_effort_only((e, r, y) in columns()) {
        let full = fit_full(&e, &r, &y).unwrap();
        let effort = fit_effort_only(&e, &y).unwrap();
        prop_assert!(full.rmse <= effort.rmse + 1e-12);
    }

    #[test]
    fn single_regressor_fits_match_closed_form((e, r, y) in columns()) {
        for (x, f) in [(&e, fit_effort_only(&e, &y).unwrap()), (&r, fit_risk_only(&r, &y).unwrap())] {
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let slope = sxy / sxx;
            prop_assert!((f.beta1 - slope).abs() < 1e-8 * (1.0 + slope.abs()));
            prop_assert!((f.beta0 - (my - slope * mx)).abs() < 1e-8 * (1.0 + my.abs() + (slope * mx).abs()));
        }
    }

    #[test]
    fn zscores_ignore_affine_rescaling(v in prop::collection::vec(-10.0f64..10.0, 3..30), a in 0.1f64..20.0, b in -50.0f64..50.0) {
        prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-3));
        let z = zscore(&v).unwrap();
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let zw = zscore(&w).unwrap();
        for (p, q) in z.iter().zip(&zw) {
            prop_assert!((p - q).abs() < 1e-9);
        }
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn participant_scale_use_does_not_matter(
        base in prop::collection::vec(0.0f64..10.0, 8),
        scales in prop::collection::vec((0.2f64..5.0, -5.0f64..5.0), 2..6),
    ) {
        prop_assume!(base.iter().any(|x| (x - base[0]).abs() > 1e-3));
        let rows: Vec<Vec<f64>> = scales.iter().map(|(a, b)| base.iter().map(|x| a * x + b).collect()).collect();
        let ds = HumanDataset::from_matrix("d", trial_ids(8), &rows).unwrap();
        let mean = zscore_and_average(&ds).unwrap();
        let expected = zscore(&base).unwrap();
        for (p, q) in mean.iter().zip(&expected) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_is_reproducible(seed in any::<u64>()) {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|p| (0..8).map(|t| ((p * 7 + t * 3) % 11) as f64 + t as f64).collect())
            .collect();
        let ds = HumanDataset::from_matrix("d", trial_ids(8), &rows).unwrap();
        let preds: BTreeMap<String, Vec<f64>> = [
            ("rising".to_string(), (0..8).map(|t| t as f64).collect()),
            ("falling".to_string(), (0..8).map(|t| -(t as f64)).collect()),
        ]
        .into();
        let a = bootstrap_compare(&ds, &preds, 50, seed).unwrap();
        let b = bootstrap_compare(&ds, &preds, 50, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for m in &a.models {
            prop_assert!(m.lower <= m.median && m.median <= m.upper);
        }
    }
}
