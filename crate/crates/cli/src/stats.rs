//! Small statistics helpers shared by the harness and the validation suite.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (unbiased sample variance); zero for fewer than
/// two observations.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of a binomial proportion estimate.
pub fn proportion_stderr(p_hat: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p_hat.clamp(0.0, 1.0) * (1.0 - p_hat.clamp(0.0, 1.0)) / n as f64).sqrt()
}

/// Two-sided Kolmogorov-Smirnov statistic of integer samples against a CDF.
///
/// `samples` need not be sorted. The CDF is evaluated at each distinct value
/// `x` (as `P(X <= x)`), and the statistic is the largest discrepancy against
/// the empirical CDF from either side of each step.
pub fn ks_statistic(samples: &[u64], cdf: impl Fn(u64) -> f64) -> f64 {
    assert!(!samples.is_empty());
    let mut v = samples.to_vec();
    v.sort_unstable();
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0usize;
    while i < v.len() {
        let x = v[i];
        let mut j = i;
        while j < v.len() && v[j] == x {
            j += 1;
        }
        let below = i as f64 / n; // empirical CDF just under x
        let at = j as f64 / n; // empirical CDF at x
        let f_at = cdf(x);
        let f_below = if x == 0 { 0.0 } else { cdf(x - 1) };
        d = d.max((at - f_at).abs()).max((f_below - below).abs());
        i = j;
    }
    d
}

/// Asymptotic two-sided KS critical value at significance 0.01.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        // var = 5/3, se = sqrt(5/12)
        assert!((stderr_of_mean(&xs) - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(stderr_of_mean(&[1.0]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn ks_detects_mismatch_and_accepts_match() {
        // uniform integers 0..9 against their own CDF
        let samples: Vec<u64> = (0..10_000).map(|i| i % 10).collect();
        let d = ks_statistic(&samples, |x| (x.min(9) + 1) as f64 / 10.0);
        assert!(d < ks_critical_1pct(samples.len()), "d = {d}");
        // same samples against a shifted CDF
        let d_bad = ks_statistic(&samples, |x| ((x.min(9) + 1) as f64 / 10.0).powi(2));
        assert!(d_bad > ks_critical_1pct(samples.len()));
    }
}
