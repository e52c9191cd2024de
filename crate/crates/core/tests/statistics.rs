mod common;

use approx::assert_relative_eq;
use hipmetrics::agreement::{agreement_report, bland_altman, icc_2_1, icc_2_1_table, PairedSeries};
use hipmetrics::split::ks_statistic;
use hipmetrics::stats::{linear_fit, student_t_cdf, student_t_two_sided_p};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn icc_table_matches_anova_for_more_raters() {
    let mut r = common::rng(20);
    for _ in 0..200 {
        let n = r.random_range(3..=30);
        let k = r.random_range(2..=6);
        let table: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base = r.random_range(20.0..80.0);
                (0..k)
                    .map(|j| base + j as f64 * 0.3 + r.random_range(-4.0..4.0))
                    .collect()
            })
            .collect();
        let got = icc_2_1_table(&table).unwrap();
        let want = common::anova(&table);
        assert_relative_eq!(got.icc, want.icc_2_1, epsilon = 1e-9);
        assert_relative_eq!(got.ms_rows, want.ms_rows, max_relative = 1e-9);
        assert_relative_eq!(got.ms_cols, want.ms_cols, epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(got.ms_error, want.ms_error, max_relative = 1e-9);
    }
}

#[test]
fn icc_fast_path_equals_table_form() {
    let mut r = common::rng(21);
    for _ in 0..100 {
        let n = r.random_range(3..=40);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.0..100.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v * 0.9 + r.random_range(-5.0..5.0)).collect();
        let table: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
        let fast = icc_2_1(&PairedSeries::new(a, b).unwrap()).unwrap();
        assert_relative_eq!(fast.icc, icc_2_1_table(&table).unwrap().icc, epsilon = 1e-12);
    }
}

#[test]
fn slope_p_value_matches_quadrature() {
    let mut r = common::rng(22);
    for _ in 0..50 {
        let n = r.random_range(4..=40);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(30.0..90.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.05 * v + r.random_range(-3.0..3.0)).collect();
        let fit = linear_fit(&x, &y).unwrap();
        let t = fit.t_stat.unwrap();
        let df = (n - 2) as f64;
        let want = 2.0 * (1.0 - common::t_cdf_quadrature(t.abs(), df));
        assert!((fit.slope_p.unwrap() - want).abs() < 1e-6, "n={n} t={t}");
    }
}

#[test]
fn t_cdf_symmetry_and_tails() {
    for df in [1.0, 2.0, 5.0, 30.0, 100.0, 1e4] {
        for t in [0.1, 1.0, 2.0, 10.0] {
            assert_relative_eq!(student_t_cdf(t, df) + student_t_cdf(-t, df), 1.0, epsilon = 1e-12);
        }
        assert_eq!(student_t_cdf(0.0, df), 0.5);
        assert_eq!(student_t_two_sided_p(0.0, df), 1.0);
    }
    // large df approaches the normal: Φ(1.96) ≈ 0.9750021
    assert!((student_t_cdf(1.96, 1e6) - 0.9750021048517795).abs() < 1e-6);
}

#[test]
fn bland_altman_regression_matches_oracle() {
    let mut r = common::rng(23);
    for _ in 0..50 {
        let n = r.random_range(3..=50);
        let gt: Vec<f64> = (0..n).map(|_| r.random_range(40.0..90.0)).collect();
        let pred: Vec<f64> = gt.iter().map(|g| 1.1 * g - 4.0 + r.random_range(-3.0..3.0)).collect();
        let s = PairedSeries::new(pred, gt).unwrap();
        let ba = bland_altman(&s).unwrap();
        let reg = ba.regression.unwrap();
        let oracle = common::ols_normal_equations(&s.means(), &s.differences());
        assert_relative_eq!(reg.slope, oracle.slope, epsilon = 1e-9);
        assert_relative_eq!(reg.intercept, oracle.intercept, epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(reg.slope_se.unwrap(), oracle.slope_se, max_relative = 1e-9);
        let d = s.differences();
        let mean = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert_relative_eq!(ba.bias, mean, epsilon = 1e-12);
        assert_relative_eq!(ba.loa_high, mean + 1.96 * sd, epsilon = 1e-9);
        assert_relative_eq!(ba.loa_low, mean - 1.96 * sd, epsilon = 1e-9);
    }
}

#[test]
fn agreement_report_two_pairs_skips_only_p_value() {
    let s = PairedSeries::new(vec![60.0, 70.0], vec![58.0, 71.0]).unwrap();
    let rep = agreement_report(&s).unwrap();
    assert!(rep.icc.is_some());
    let ba = rep.bland_altman.unwrap();
    assert!(ba.regression.unwrap().slope_p.is_none());
    assert!(rep.notices.iter().any(|n| n.contains("p-value")));
}

#[test]
fn ks_with_heavy_ties_matches_bruteforce() {
    let mut r = common::rng(24);
    for _ in 0..300 {
        let a: Vec<f64> = (0..r.random_range(1..20))
            .map(|_| f64::from(r.random_range(0..4)))
            .collect();
        let b: Vec<f64> = (0..r.random_range(1..20))
            .map(|_| f64::from(r.random_range(0..4)))
            .collect();
        assert_eq!(ks_statistic(&a, &b).unwrap(), common::ks_brute(&a, &b));
    }
}

proptest! {
    #[test]
    fn ks_is_symmetric_and_bounded(
        a in prop::collection::vec(-100.0f64..100.0, 1..40),
        b in prop::collection::vec(-100.0f64..100.0, 1..40),
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn icc_is_invariant_to_common_shift_and_scale(
        a in prop::collection::vec(0.0f64..100.0, 3..30),
        shift in -50.0f64..50.0,
        scale in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut r = common::rng(seed);
        let b: Vec<f64> = a.iter().map(|v| v + r.random_range(-10.0..10.0)).collect();
        let Ok(base) = icc_2_1(&PairedSeries::new(a.clone(), b.clone()).unwrap()) else { return Ok(()) };
        let t = |v: &Vec<f64>| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let moved = icc_2_1(&PairedSeries::new(t(&a), t(&b)).unwrap()).unwrap();
        prop_assert!((base.icc - moved.icc).abs() < 1e-9);
    }
}
