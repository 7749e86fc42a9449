//! Goodness-of-fit tests and compensated moment estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Standard normal CDF through `erfc` (musl port), accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, variance: f64::NAN, se: f64::NAN };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let variance = if n > 1 {
            compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Self { n, mean, variance, se: (variance / n as f64).sqrt() }
    }
}

/// Sample skewness and excess kurtosis.
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = compensated_sum(xs.iter().copied()) / n;
    let m2 = compensated_sum(xs.iter().map(|&x| (x - m).powi(2))) / n;
    let m3 = compensated_sum(xs.iter().map(|&x| (x - m).powi(3))) / n;
    let m4 = compensated_sum(xs.iter().map(|&x| (x - m).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    sxy / (sxx * syy).sqrt()
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let d = ks_distance(samples, &cdf, &cdf);
    ks_result(samples.len(), d)
}

fn ks_result(n: usize, d: f64) -> KsResult {
    let sn = (n as f64).sqrt();
    // Stephens' finite-sample correction
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult { n, statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// `sup_x |F_n(x) - F(x)|` for a target with possible atoms.
///
/// `cdf_left(x)` must return `F(x-)`; for continuous targets pass the CDF
/// twice. Infinite samples are allowed and count as mass at `+inf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        if x.is_finite() {
            d = d.max((cdf_left(x) - i as f64 / n).abs());
            d = d.max((j as f64 / n - cdf(x)).abs());
        }
        i = j;
    }
    d
}

/// KS test against a target with atoms (see [`ks_distance`]); the p-value
/// uses the continuous-target Kolmogorov law and is conservative for atoms.
pub fn ks_test_general(
    samples: &[f64],
    cdf: impl Fn(f64) -> f64,
    cdf_left: impl Fn(f64) -> f64,
) -> KsResult {
    ks_result(samples.len(), ks_distance(samples, cdf, cdf_left))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson chi-square test of independence for a contingency table.
pub fn chi_square_independence(table: &[Vec<f64>]) -> ChiSquareResult {
    let rows = table.len();
    let cols = table[0].len();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let e = row_sums[r] * col_sums[c] / total;
            if e > 0.0 {
                stat += (table[r][c] - e).powi(2) / e;
            }
        }
    }
    let dof = ((rows - 1) * (cols - 1)) as f64;
    let p_value = ChiSquared::new(dof).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    ChiSquareResult { statistic: stat, dof, p_value }
}

/// Two-sided binomial z-score of `k` successes in `n` trials against `p`.
pub fn binomial_z(k: usize, n: usize, p: f64) -> f64 {
    let nf = n as f64;
    (k as f64 - nf * p) / (nf * p * (1.0 - p)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(-1.0) + normal_cdf(1.0), 1.0, epsilon = 1e-15);
        // deep tail keeps relative accuracy
        assert_relative_eq!(normal_cdf(-10.0), 7.619_853_024_160_47e-24, max_relative = 1e-10);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn kolmogorov_tail_known_points() {
        // P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_distance_by_hand() {
        // samples 0.1, 0.5, 0.9 against U(0,1): max gap is 1/3 - 0.1 = 0.2333
        let d = ks_distance(&[0.5, 0.1, 0.9], |x| x, |x| x);
        assert_relative_eq!(d, 1.0 / 3.0 - 0.1, epsilon = 1e-12);
    }

    #[test]
    fn ks_distance_with_atoms() {
        // target 0.3 at 1, 0.7 at 2; sample frequencies 0.5 / 0.5
        let cdf = |x: f64| if x < 1.0 { 0.0 } else if x < 2.0 { 0.3 } else { 1.0 };
        let left = |x: f64| if x <= 1.0 { 0.0 } else if x <= 2.0 { 0.3 } else { 1.0 };
        let d = ks_distance(&[1.0, 2.0, 1.0, 2.0], cdf, left);
        assert_relative_eq!(d, 0.2, epsilon = 1e-12);
        let d = ks_distance(&[1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0], cdf, left);
        assert!(d < 1e-12);
    }

    #[test]
    fn chi_square_independent_table() {
        let r = chi_square_independence(&[vec![25.0, 25.0], vec![25.0, 25.0]]);
        assert_eq!(r.statistic, 0.0);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
        let r = chi_square_independence(&[vec![40.0, 10.0], vec![10.0, 40.0]]);
        // (15^2/25) * 4 = 36
        assert_relative_eq!(r.statistic, 36.0, epsilon = 1e-12);
        assert!(r.p_value < 1e-8);
    }

    #[test]
    fn summary_and_correlation() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(s.mean, 2.5);
        assert_relative_eq!(s.variance, 5.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0, epsilon = 1e-14);
        assert_relative_eq!(correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0, epsilon = 1e-14);
    }
}
