//! Independent reference implementations and fixture generators shared by
//! the integration suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-way ANOVA table by definition; `table[i][j]` is subject `i`, rater `j`.
pub struct Anova {
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
    pub icc_2_1: f64,
}

pub fn anova(table: &[Vec<f64>]) -> Anova {
    let n = table.len();
    let k = table[0].len();
    let total: f64 = table.iter().flatten().sum();
    let grand = total / (n * k) as f64;
    let mut ss_total = 0.0;
    for row in table {
        for &x in row {
            ss_total += (x - grand) * (x - grand);
        }
    }
    let mut ss_rows = 0.0;
    for row in table {
        let m = row.iter().sum::<f64>() / k as f64;
        ss_rows += k as f64 * (m - grand) * (m - grand);
    }
    let mut ss_cols = 0.0;
    for j in 0..k {
        let m = table.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        ss_cols += n as f64 * (m - grand) * (m - grand);
    }
    let ss_error = ss_total - ss_rows - ss_cols;
    let ms_rows = ss_rows / (n - 1) as f64;
    let ms_cols = ss_cols / (k - 1) as f64;
    let ms_error = ss_error / ((n - 1) * (k - 1)) as f64;
    let (nf, kf) = (n as f64, k as f64);
    let icc_2_1 = (ms_rows - ms_error) / (ms_rows + (kf - 1.0) * ms_error + kf * (ms_cols - ms_error) / nf);
    Anova {
        ms_rows,
        ms_cols,
        ms_error,
        icc_2_1,
    }
}

/// Fraction of `xs` at or below `t`, by full scan.
fn ecdf(xs: &[f64], t: f64) -> f64 {
    xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64
}

/// Two-sample KS statistic evaluated at every pooled sample point.
pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .chain(b)
        .map(|&t| (ecdf(a, t) - ecdf(b, t)).abs())
        .fold(0.0, f64::max)
}

/// Student-t CDF by quadrature. With `x = sqrt(df) tan θ` the density becomes
/// proportional to `cos^(df-1) θ`, so the CDF needs no gamma function:
/// `F(t) = 1/2 + sign(t) * I(atan(t/sqrt(df))) / (2 I(π/2))`.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    let f = |theta: f64| theta.cos().powf(df - 1.0);
    let simpson = |upper: f64| {
        let n = 20_000;
        let h = upper / n as f64;
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    };
    let phi = (t.abs() / df.sqrt()).atan();
    let frac = simpson(phi) / simpson(std::f64::consts::FRAC_PI_2);
    0.5 + t.signum() * 0.5 * frac
}

/// OLS of `y` on `x` from the 2x2 normal equations, by Cramer's rule.
pub struct Ols {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn ols_normal_equations(x: &[f64], y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let intercept = (sy * sxx - sx * sxy) / det;
    let slope = (n * sxy - sx * sy) / det;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let s2 = rss / (n - 2.0);
    Ols {
        slope,
        intercept,
        slope_se: (s2 * n / det).sqrt(),
    }
}

/// Patients with one to three images each, α drawn from one of two modes.
pub fn bimodal_patients(n: usize, seed: u64) -> Vec<hipmetrics::split::PatientAlphas> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let centre = if r.random_bool(0.5) { 50.0 } else { 75.0 };
            let images = r.random_range(1..=3);
            hipmetrics::split::PatientAlphas {
                id: format!("P{i:03}"),
                alphas: (0..images).map(|_| centre + r.random_range(-6.0..6.0)).collect(),
            }
        })
        .collect()
}

/// Maximum pairwise KS of a uniformly random patient partition with the given
/// sizes, computed entirely with the brute-force oracle.
pub fn random_partition_max_ks(patients: &[hipmetrics::split::PatientAlphas], sizes: [usize; 3], seed: u64) -> f64 {
    let mut order: Vec<usize> = (0..patients.len()).collect();
    order.shuffle(&mut rng(seed));
    let collect = |idx: &[usize]| -> Vec<f64> { idx.iter().flat_map(|&i| patients[i].alphas.clone()).collect() };
    let train = collect(&order[..sizes[0]]);
    let val = collect(&order[sizes[0]..sizes[0] + sizes[1]]);
    let test = collect(&order[sizes[0] + sizes[1]..]);
    ks_brute(&train, &val)
        .max(ks_brute(&train, &test))
        .max(ks_brute(&val, &test))
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
