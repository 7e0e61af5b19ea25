//! Statistical machinery for the verification gates: Kolmogorov-Smirnov
//! tests, empirical CDFs, binomial tolerance checks, log-log tail regression
//! and a permutation test for exchangeability.
//!
//! The KS p-value uses the classical asymptotic complement CDF
//! `Q(z) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2)` evaluated at
//! `z = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D`, where `n_e` is the
//! effective sample size. This is the standard desk-scale approximation; it
//! is accurate to a few percent for `n_e >= 20`, which is far below the
//! sample sizes used by the gates.

use crate::error::{Error, Result};

/// Complement of the Kolmogorov-Smirnov limit CDF.
///
/// Two complementary series are used: a theta-transformed series for small z
/// (fast convergence near 0) and the direct alternating series elsewhere.
pub fn ks_complement_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let t = (-std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp();
        let sum = t + t.powi(9) + t.powi(25) + t.powi(49);
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / z * sum
    } else {
        let t = (-2.0 * z * z).exp();
        2.0 * (t - t.powi(4) + t.powi(9))
    }
    .clamp(0.0, 1.0)
}

/// Result of a KS test: the statistic, its p-value, effective sample size.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub stat: f64,
    pub p_value: f64,
    pub n_effective: f64,
}

fn ks_p(stat: f64, n_effective: f64) -> f64 {
    let sq = n_effective.sqrt();
    ks_complement_cdf((sq + 0.12 + 0.11 / sq) * stat)
}

/// Two-sample KS test. Inputs need not be sorted.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.len() < 4 || ys.len() < 4 {
        return Err(Error::Param(format!(
            "ks_two_sample needs at least 4 points per sample, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut stat: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        let d = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        stat = stat.max(d);
    }
    let n_effective = (n as f64 * m as f64) / (n as f64 + m as f64);
    Ok(KsResult {
        stat,
        p_value: ks_p(stat, n_effective),
        n_effective,
    })
}

/// One-sample KS test against a CDF given as a closure.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    if xs.len() < 4 {
        return Err(Error::Param(format!(
            "ks_one_sample needs at least 4 points, got {}",
            xs.len()
        )));
    }
    let mut a = xs.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = a.len() as f64;
    let mut stat: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        stat = stat.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(KsResult {
        stat,
        p_value: ks_p(stat, n),
        n_effective: n,
    })
}

/// KS test of an explicitly tabulated empirical CDF against a reference CDF.
///
/// `points` are (x, F_hat(x)) pairs with x strictly increasing and F_hat
/// nondecreasing in [0, 1]; `n_effective` scales the p-value. Used by the
/// eps-extrapolated gates, where the tested CDF is a Richardson combination
/// of two empirical CDFs rather than a plain sample.
pub fn ks_cdf_table<F: Fn(f64) -> f64>(
    points: &[(f64, f64)],
    cdf: F,
    n_effective: f64,
) -> Result<KsResult> {
    if points.len() < 4 {
        return Err(Error::Param("ks_cdf_table needs at least 4 points".into()));
    }
    let mut stat: f64 = 0.0;
    let mut prev = 0.0f64;
    for &(x, fh) in points {
        let f = cdf(x);
        stat = stat.max((f - prev).abs()).max((fh - f).abs());
        prev = fh;
    }
    Ok(KsResult {
        stat,
        p_value: ks_p(stat, n_effective),
        n_effective,
    })
}

/// Evaluates the empirical CDF of `sample` (need not be sorted) on `grid`.
pub fn ecdf_on_grid(sample: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = s.len() as f64;
    grid.iter()
        .map(|&g| {
            let k = s.partition_point(|&v| v <= g);
            k as f64 / n
        })
        .collect()
}

/// Standard normal CDF via an Abramowitz-Stegun style rational erf
/// approximation (absolute error below 1.5e-7, ample for the gates here).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// CDF of |N(0,1)|, the marginal of reflecting Brownian motion at time 1.
pub fn folded_normal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        2.0 * normal_cdf(x) - 1.0
    }
}

pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Checks an empirical proportion against its target within `k` binomial
/// standard deviations. Returns (observed, allowed absolute deviation).
pub fn binomial_gate(hits: usize, n: usize, p: f64, k_sigma: f64) -> (f64, f64, bool) {
    let phat = hits as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let tol = k_sigma * sigma;
    (phat, tol, (phat - p).abs() <= tol)
}

/// Output of [`tail_index`]: a log-log least squares fit of the upper tail.
#[derive(Debug, Clone, Copy)]
pub struct TailFit {
    /// Estimated tail exponent (the survival function decays like x^-index).
    pub index: f64,
    /// Least squares standard error of the exponent.
    pub std_err: f64,
    /// Coefficient of determination of the log-log fit; power laws sit very
    /// close to 1, exponential tails fall visibly below.
    pub r_squared: f64,
    /// Number of order statistics entering the fit.
    pub n_tail: usize,
}

/// Estimates a power-law tail exponent from the top of the empirical survival
/// function.
///
/// The fit window covers survival levels between `10/n` and `1000/n`, i.e.
/// the top two decades of the empirical survival function (ranks 10..=1000).
/// A window anchored on the value axis would retain only ~10 order statistics
/// at n = 1e4 and could not meet a +-0.05 tolerance, so the probability axis
/// is the one that is cut into decades. Requires at least 1000 points and a
/// value spread of two decades inside the window.
pub fn tail_index(jumps: &[f64]) -> Result<TailFit> {
    let n = jumps.len();
    if n < 1000 {
        return Err(Error::TailData(format!(
            "tail_index needs at least 1000 jumps, got {n}"
        )));
    }
    if jumps.iter().any(|&x| x <= 0.0 || x.is_nan()) {
        return Err(Error::Param("tail_index requires strictly positive jumps".into()));
    }
    let mut s = jumps.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap()); // descending
    let lo_rank = 10usize;
    let hi_rank = 1000usize.min(n / 10).max(lo_rank + 20);
    let pts: Vec<(f64, f64)> = (lo_rank..=hi_rank)
        .map(|r| {
            let x = s[r - 1];
            let sv = r as f64 / n as f64;
            (x.ln(), sv.ln())
        })
        .collect();
    let span = (pts.first().unwrap().0 - pts.last().unwrap().0).abs();
    if span < std::f64::consts::LN_10 {
        return Err(Error::TailData(
            "tail values span less than one decade in the fit window".into(),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    let slope = sxy / sxx;
    let resid = syy - slope * sxy;
    let dof = (m - 2.0).max(1.0);
    let std_err = (resid.max(0.0) / dof / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - resid / syy } else { 1.0 };
    Ok(TailFit {
        index: -slope,
        std_err,
        r_squared,
        n_tail: pts.len(),
    })
}

/// Permutation test for exchangeability of a sequence of window statistics.
///
/// The observed statistic is the absolute correlation between window index
/// and value; its null distribution is built by `n_perm` random shuffles.
/// Returns the p-value (fraction of shuffles at least as extreme).
pub fn permutation_exchangeability(
    values: &[f64],
    n_perm: usize,
    rng: &mut crate::rng::RngStream,
) -> f64 {
    use rand::Rng;
    let n = values.len();
    assert!(n >= 4);
    let corr = |vals: &[f64]| -> f64 {
        let m = vals.len() as f64;
        let mx = (m - 1.0) / 2.0;
        let my = vals.iter().sum::<f64>() / m;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (i, &v) in vals.iter().enumerate() {
            let dx = i as f64 - mx;
            let dy = v - my;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        if syy == 0.0 {
            0.0
        } else {
            (sxy / (sxx * syy).sqrt()).abs()
        }
    };
    let observed = corr(values);
    let mut perm = values.to_vec();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        if corr(&perm) >= observed {
            hits += 1;
        }
    }
    (hits as f64 + 1.0) / (n_perm as f64 + 1.0)
}

/// Richardson extrapolation of a scalar measured at truncation levels
/// `eps` and `eps/2`, assuming a bias linear in eps.
pub fn richardson(v_eps: f64, v_half: f64) -> f64 {
    2.0 * v_half - v_eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn ks_complement_limits() {
        assert_relative_eq!(ks_complement_cdf(0.0), 1.0);
        assert!(ks_complement_cdf(0.3) > 0.999);
        // Frozen references for the asymptotic Q_KS (scipy.special.kolmogorov).
        assert_relative_eq!(ks_complement_cdf(1.0), 0.26999967, epsilon = 1e-6);
        assert_relative_eq!(ks_complement_cdf(2.0), 0.00067092, epsilon = 1e-6);
        assert!(ks_complement_cdf(5.0) < 1e-10);
    }

    #[test]
    fn ks_two_sample_identical_samples() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(r.stat, 0.0);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_two_sample_disjoint_samples() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..200).map(|i| 1000.0 + i as f64).collect();
        let r = ks_two_sample(&xs, &ys).unwrap();
        assert_relative_eq!(r.stat, 1.0);
        assert!(r.p_value < 1e-12);
    }

    #[test]
    fn ks_null_is_calibrated() {
        // Uniform vs uniform, many replicates: p should rarely dip below 0.01.
        let mut low = 0;
        for k in 0..200 {
            let mut rng = crate::rng::RngStream::new(99, k);
            let xs: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
            let ys: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
            if ks_two_sample(&xs, &ys).unwrap().p_value < 0.01 {
                low += 1;
            }
        }
        assert!(low <= 8, "{low} of 200 null KS tests below 0.01");
    }

    #[test]
    fn one_sample_against_uniform() {
        let mut rng = crate::rng::RngStream::new(5, 0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.8).collect();
        let r2 = ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r2.p_value < 1e-6);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_relative_eq!(normal_cdf(1.0), 0.8413447, epsilon = 2e-6);
        assert_relative_eq!(normal_cdf(-1.96), 0.0249979, epsilon = 2e-6);
        assert_relative_eq!(folded_normal_cdf(1.0), 0.6826895, epsilon = 4e-6);
    }

    #[test]
    fn tail_index_recovers_pareto() {
        // Pareto survival t^-0.5: exact inverse-CDF sample, index 0.5.
        let mut rng = crate::rng::RngStream::new(7, 1);
        let jumps: Vec<f64> = (0..20000)
            .map(|_| {
                let u: f64 = rng.gen::<f64>();
                u.powf(-2.0)
            })
            .collect();
        let fit = tail_index(&jumps).unwrap();
        assert!((fit.index - 0.5).abs() < 0.03, "index {}", fit.index);
        assert!(fit.r_squared > 0.98);
    }

    #[test]
    fn tail_index_rejects_exponential() {
        let mut rng = crate::rng::RngStream::new(7, 2);
        let jumps: Vec<f64> = (0..20000)
            .map(|_| {
                let u: f64 = rng.gen::<f64>();
                -(1.0 - u).ln()
            })
            .collect();
        // A light tail is rejected either by the decade-span guard or by a
        // poor log-log fit; both count.
        match tail_index(&jumps) {
            Err(Error::TailData(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
            Ok(fit) => assert!(
                fit.r_squared < 0.98,
                "exponential tail should not look like a power law, r2 = {}",
                fit.r_squared
            ),
        }
    }

    #[test]
    fn tail_index_needs_data() {
        assert!(tail_index(&[1.0; 100]).is_err());
    }

    #[test]
    fn permutation_test_flags_trend() {
        let mut rng = crate::rng::RngStream::new(11, 0);
        let flat: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let p_flat = permutation_exchangeability(&flat, 500, &mut rng.child(0));
        assert!(p_flat > 0.01);
        let trend: Vec<f64> = (0..16).map(|i| i as f64 + 0.01 * rng.gen::<f64>()).collect();
        let p_trend = permutation_exchangeability(&trend, 500, &mut rng.child(1));
        assert!(p_trend < 0.01);
    }
}
