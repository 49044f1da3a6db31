//! Small goodness-of-fit helpers for the sampler checks: Pearson chi-square
//! against an exact law, and one/two-sample Kolmogorov-Smirnov with the
//! asymptotic p-value. All f64; these back the verification suites, not the
//! numeric core.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square p-value of observed counts against expected
/// probabilities (normalized internally). Bins with expected count below 5
/// are pooled into the following bin; degrees of freedom = bins - 1.
pub fn chi_square_pvalue(observed: &[usize], expected_weights: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected_weights.len());
    let total: usize = observed.iter().sum();
    let wsum: f64 = expected_weights.iter().sum();
    assert!(total > 0 && wsum > 0.0);

    // Pool low-expectation bins.
    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &w) in observed.iter().zip(expected_weights) {
        acc_o += o as f64;
        acc_e += w / wsum * total as f64;
        if acc_e >= 5.0 {
            pooled.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            pooled.push((acc_o, acc_e));
        }
    }
    if pooled.len() < 2 {
        return 1.0;
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (pooled.len() - 1) as f64;
    let chi = ChiSquared::new(dof).expect("dof >= 1");
    1.0 - chi.cdf(stat)
}

/// Asymptotic Kolmogorov survival function `Q(t) = 2 Σ (-1)^{k-1} e^{-2k²t²}`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Two-sample KS p-value (asymptotic, with the Stephens small-sample
/// correction).
pub fn ks2_pvalue(xs: &[f64], ys: &[f64]) -> f64 {
    let xs = sorted(xs);
    let ys = sorted(ys);
    let (n, m) = (xs.len(), ys.len());
    assert!(n > 0 && m > 0);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let ne_sqrt = ne.sqrt();
    kolmogorov_q((ne_sqrt + 0.12 + 0.11 / ne_sqrt) * d)
}

/// One-sample KS p-value against a continuous CDF.
pub fn ks1_pvalue(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sorted(xs);
    let n = xs.len();
    assert!(n > 0);
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n as f64).abs());
        d = d.max(((i + 1) as f64 / n as f64 - c).abs());
    }
    let ns = (n as f64).sqrt();
    kolmogorov_q((ns + 0.12 + 0.11 / ns) * d)
}
