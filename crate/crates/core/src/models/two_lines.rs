//! The two-lines ensemble for the open TASEP (`alpha + beta > 1`): a pair
//! of independent right-up walks weighted by the running minimum of their
//! difference. Marginalizing the second walk recovers the invariant
//! measure, and the hidden-walk reweighting identities connect it to the
//! case-1 bridge.

use crate::error::{Error, Result};
use crate::models::tasep::{tasep_case1_mixture, TasepParams};
use crate::oracle::ExactDistribution;
use crate::scalar::{cast, Scalar};

/// Enumeration output: the word marginal and the normalizer `𝒵_N`.
#[derive(Clone, Debug)]
pub struct TwoLinesEnsemble<T> {
    pub dist: ExactDistribution<T>,
    pub normalizer: T,
}

/// Unnormalized two-lines weight of a pair of right-up walks from 0
/// (heights, length N+1): `((1-β)/β)^{s¹_{N+1} - s²_{N+1}}
/// · c^{-min_i(s¹_i - s²_i)} · (1/4)^N` with `c = (1-α)(1-β)/(αβ)`.
pub fn two_lines_weight<T: Scalar>(p: &TasepParams<T>, s1: &[usize], s2: &[usize]) -> Result<T> {
    if p.alpha + p.beta <= T::one() {
        return Err(Error::TailNotSummable);
    }
    if s1.len() != p.n + 1 || s2.len() != p.n + 1 {
        return Err(Error::LengthMismatch { expected: p.n + 1, got: s1.len().max(s2.len()) });
    }
    let valid_walk = |s: &[usize]| s[0] == 0 && s.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1);
    if !valid_walk(s1) || !valid_walk(s2) {
        return Err(Error::InvalidSpec("inputs must be right-up walks from 0".into()));
    }
    let r = (T::one() - p.beta) / p.beta;
    let c = (T::one() - p.alpha) * (T::one() - p.beta) / (p.alpha * p.beta);
    let min_diff = s1
        .iter()
        .zip(s2)
        .map(|(&a, &b)| a as i64 - b as i64)
        .min()
        .unwrap();
    let final_diff = s1[p.n] as i64 - s2[p.n] as i64;
    let quarter = cast::<T>(0.25);
    Ok(r.powi(final_diff as i32) * c.powi(-min_diff as i32) * quarter.powi(p.n as i32))
}

/// Enumerate all `4^N` walk pairs, marginalize onto the increments of the
/// first walk, and report the normalizer.
pub fn two_lines_enumerate<T: Scalar>(p: &TasepParams<T>) -> Result<TwoLinesEnsemble<T>> {
    if p.n > 9 {
        return Err(Error::TooLarge { size: 4u128.pow(p.n as u32), limit: 4u128.pow(9) });
    }
    let n = p.n;
    let size = 1usize << n;
    let mut weights = vec![T::zero(); size];
    let mut normalizer = T::zero();
    let walk_from_bits = |bits: usize| -> Vec<usize> {
        let mut s = Vec::with_capacity(n + 1);
        s.push(0usize);
        for i in 0..n {
            // Bit i = increment at step i+1; leftmost step is the high bit
            // so the word index matches the big-endian encoding.
            let inc = (bits >> (n - 1 - i)) & 1;
            s.push(s[i] + inc);
        }
        s
    };
    for eta_bits in 0..size {
        let s1 = walk_from_bits(eta_bits);
        for gamma_bits in 0..size {
            let s2 = walk_from_bits(gamma_bits);
            let w = two_lines_weight(p, &s1, &s2)?;
            weights[eta_bits] = weights[eta_bits] + w;
            normalizer = normalizer + w;
        }
    }
    Ok(TwoLinesEnsemble {
        dist: ExactDistribution::from_weights(n, 2, weights)?,
        normalizer,
    })
}

/// The normalizer the bridge predicts: `𝒵_N = (g^T P^N f)(α+β-1)/(αβ)`.
pub fn two_lines_normalizer_identity<T: Scalar>(p: &TasepParams<T>) -> Result<T> {
    let mix = tasep_case1_mixture(p)?;
    let table = mix.bridge().backward_table()?;
    let gpf = mix.bridge().log_normalizer(&table).exp();
    Ok(gpf * (p.alpha + p.beta - T::one()) / (p.alpha * p.beta))
}

/// Path weight under the reflected-walk matrix `P̂` (stay 1/2; up/down 1/4
/// away from zero; 0→1 with 1/2) times the halving factor `(1/2)^{#(0→1)}`.
pub fn hat_path_weight<T: Scalar>(zeta: &[usize]) -> T {
    let half = cast::<T>(0.5);
    let quarter = cast::<T>(0.25);
    let mut w = T::one();
    for pair in zeta.windows(2) {
        let step = match (pair[0], pair[1]) {
            (b, b2) if b == b2 => half,
            (0, 1) => half * half, // P̂ entry 1/2 times the halving factor
            (b, b2) if b2 == b + 1 || b2 + 1 == b => quarter,
            _ => T::zero(),
        };
        w = w * step;
    }
    w
}

/// Path weight of the free lazy walk on the integers: stay 1/2, move 1/4.
pub fn tilde_path_weight<T: Scalar>(xi: &[i64]) -> T {
    let half = cast::<T>(0.5);
    let quarter = cast::<T>(0.25);
    let mut w = T::one();
    for pair in xi.windows(2) {
        let step = match pair[1] - pair[0] {
            0 => half,
            1 | -1 => quarter,
            _ => T::zero(),
        };
        w = w * step;
    }
    w
}

/// The law of the shift class of a bridge path: summing the case-1 bridge
/// over all nonnegative shifts of a fixed increment pattern `ξ` (ξ_1 = 0)
/// collapses, by the reflection identity and a geometric sum, to
/// `ℙ_{P̃}(ξ) ((1-β)/β)^{ξ_{N+1}} / (c^{min ξ} (g^T P^N f)(1-c))`.
pub fn tilde_rho<T: Scalar>(p: &TasepParams<T>, xi: &[i64]) -> Result<T> {
    if xi.len() != p.n + 1 {
        return Err(Error::LengthMismatch { expected: p.n + 1, got: xi.len() });
    }
    if xi[0] != 0 {
        return Err(Error::InvalidSpec("shift-class paths start at zero".into()));
    }
    let mix = tasep_case1_mixture(p)?;
    let table = mix.bridge().backward_table()?;
    let gpf = mix.bridge().log_normalizer(&table).exp();
    let c = (T::one() - p.alpha) * (T::one() - p.beta) / (p.alpha * p.beta);
    let r = (T::one() - p.beta) / p.beta;
    let min = *xi.iter().min().unwrap();
    let num = tilde_path_weight::<T>(xi) * r.powi(xi[p.n] as i32);
    Ok(num / (c.powi(min as i32) * gpf * (T::one() - c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tasep::tasep_case1_mpa;
    use crate::oracle::{enumerate_measure, max_abs_diff};

    fn params(n: usize) -> TasepParams<f64> {
        TasepParams::new(0.7, 0.8, n, 40).unwrap()
    }

    #[test]
    fn single_site_hand_sum() {
        // N=1: four walk pairs; mu(1)/mu(0) = alpha/beta... computed by hand:
        // unnormalized masses are (1/alpha)/4 for eta=0 and (1/beta)/4 for 1.
        let p = params(1);
        let ens = two_lines_enumerate(&p).unwrap();
        let m0 = ens.dist.prob(0);
        let m1 = ens.dist.prob(1);
        let expect_ratio = (1.0 / 0.7) / (1.0 / 0.8);
        assert!((m0 / m1 - expect_ratio).abs() < 1e-14);
        let z_expect = (1.0 / 0.7 + 1.0 / 0.8) / 4.0;
        assert!((ens.normalizer - z_expect).abs() < 1e-14);
    }

    #[test]
    fn marginal_matches_mpa_measure() {
        for n in 1..=6usize {
            let p = params(n);
            let ens = two_lines_enumerate(&p).unwrap();
            let mpa = enumerate_measure(&tasep_case1_mpa(&p).unwrap(), 1 << 22).unwrap();
            let d = max_abs_diff(&ens.dist, &mpa).unwrap();
            assert!(d < 1e-10, "n={n}: {d:e}");
        }
    }

    #[test]
    fn normalizer_identity_holds() {
        for n in 1..=6usize {
            let p = params(n);
            let ens = two_lines_enumerate(&p).unwrap();
            let predicted = two_lines_normalizer_identity(&p).unwrap();
            let rel = (ens.normalizer / predicted - 1.0).abs();
            assert!(rel < 1e-10, "n={n}: {rel:e}");
        }
    }

    #[test]
    fn reflection_identity_shift_invariance() {
        // P_hat(zeta) (1/2)^{N01} = P_tilde(b + zeta) for every shift b.
        let zetas: Vec<Vec<usize>> = vec![
            vec![0, 1, 1, 0, 0, 1],
            vec![2, 1, 0, 0, 1, 2],
            vec![0, 0, 0, 1, 2, 2],
            vec![3, 3, 2, 1, 0, 0],
        ];
        for zeta in zetas {
            let lhs: f64 = hat_path_weight(&zeta);
            for shift in 0..4i64 {
                let xi: Vec<i64> = zeta.iter().map(|&z| z as i64 + shift).collect();
                let rhs: f64 = tilde_path_weight(&xi);
                assert!((lhs - rhs).abs() < 1e-15, "zeta {zeta:?} shift {shift}");
            }
        }
    }

    #[test]
    fn shift_class_law_is_the_summed_bridge() {
        // Sum rho over the nonnegative shifts of xi and compare with the
        // closed-form tilde law.
        let p = params(4);
        let mix = tasep_case1_mixture(&p).unwrap();
        let xis: Vec<Vec<i64>> = vec![
            vec![0, 1, 1, 0, 0],
            vec![0, -1, -1, 0, 1],
            vec![0, 0, 1, 2, 2],
            vec![0, -1, -2, -2, -1],
        ];
        for xi in xis {
            let m = -*xi.iter().min().unwrap();
            let top = *xi.iter().max().unwrap();
            // Shifts above the truncation carry weight ~ c^b ~ 1e-30; stop
            // just below the boundary row so exact bT1 entries are used.
            let mut summed = 0.0;
            for b in m..(39 - top) {
                let path: Vec<usize> = xi.iter().map(|&v| (v + b) as usize).collect();
                summed += mix.bridge().path_probability(&path).unwrap();
            }
            let closed = tilde_rho(&p, &xi).unwrap();
            assert!(
                (summed / closed - 1.0).abs() < 1e-10,
                "xi {xi:?}: {summed:e} vs {closed:e}"
            );
        }
    }

    #[test]
    fn guard_rejects_large_n() {
        let p = TasepParams::new(0.7, 0.8, 10, 40).unwrap();
        assert!(matches!(two_lines_enumerate(&p), Err(Error::TooLarge { .. })));
    }
}
