//! Boundary-driven TASEP on an open chain: matrix-product form of the
//! invariant measure in two representations, the closed-form bridge
//! mixtures, the continuous-time generator, and the exploration-process
//! walk behind the general-case bridge.

use rand::Rng;

use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mixture::{MarginalKernel, MixtureSpec};
use crate::mpa::{Boundary, MpaSpec};
use crate::oracle::GeneratorMatrix;
use crate::scalar::{cast, Scalar};
use crate::spectral::StochasticMatrix;

/// Parameters of the open TASEP: injection rate `alpha` on the left,
/// removal rate `beta` on the right, `n` sites, hidden-state truncation
/// level `b_max`.
#[derive(Clone, Copy, Debug)]
pub struct TasepParams<T> {
    pub alpha: T,
    pub beta: T,
    pub n: usize,
    pub b_max: usize,
}

impl<T: Scalar> TasepParams<T> {
    pub fn new(alpha: T, beta: T, n: usize, b_max: usize) -> Result<Self> {
        if !(alpha > T::zero() && alpha <= T::one() && beta > T::zero() && beta <= T::one()) {
            return Err(Error::DegenerateParams("need 0 < alpha, beta <= 1"));
        }
        if n == 0 {
            return Err(Error::DegenerateParams("need at least one site"));
        }
        if b_max < n + 2 {
            return Err(Error::DegenerateParams("truncation must satisfy b_max >= n + 2"));
        }
        Ok(TasepParams { alpha, beta, n, b_max })
    }
}

/// Letter matrices of the `alpha + beta > 1` representation, truncated to
/// `{0..b_max}`. The M^0 part is bidiagonal (diagonal + subdiagonal ones),
/// M^1 is bidiagonal (diagonal + superdiagonal ones). The truncation is
/// closed at the boundary: the mass that would leave through the missing
/// superdiagonal entry is folded into the last diagonal, split evenly
/// between the two letters. This keeps `M e = 4 e` with `e_b = b + 1` exact
/// on every row while perturbing the measure only at the geometrically
/// suppressed boundary states.
fn case1_matrices<T: Scalar>(b_max: usize) -> (Mat<T>, Mat<T>) {
    let dim = b_max + 1;
    let mut m0: Mat<T> = Mat::zeros(dim, dim);
    let mut m1: Mat<T> = Mat::zeros(dim, dim);
    for b in 0..dim {
        m0.set(b, b, T::one());
        m1.set(b, b, T::one());
        if b > 0 {
            m0.set(b, b - 1, T::one());
        }
        if b + 1 < dim {
            m1.set(b, b + 1, T::one());
        }
    }
    // Close the truncation: row b_max is missing e_{b_max+1} = b_max + 2.
    let k = cast::<T>(b_max as f64);
    let patch = (k + cast(2.0)) / ((k + T::one()) * cast(2.0));
    m0.set(b_max, b_max, T::one() + patch);
    m1.set(b_max, b_max, T::one() + patch);
    (m0, m1)
}

fn geometric_vector<T: Scalar>(ratio: T, dim: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(dim);
    let mut cur = T::one();
    for _ in 0..dim {
        v.push(cur);
        cur = cur * ratio;
    }
    v
}

fn case1_spec_at<T: Scalar>(p: &TasepParams<T>, b_max: usize) -> Result<MpaSpec<T>> {
    let (m0, m1) = case1_matrices::<T>(b_max);
    let x = geometric_vector((T::one() - p.beta) / p.beta, b_max + 1);
    let y = geometric_vector((T::one() - p.alpha) / p.alpha, b_max + 1);
    MpaSpec::new(2, b_max + 1, vec![m0, m1], Boundary::Vectors { x, y }, p.n)
}

/// Invariant measure of the open TASEP for `alpha + beta > 1`, as an MPA
/// spec on the truncated hidden space. The truncation is certified by
/// comparing `Z_N` at `b_max` and `b_max + 5`; a relative change above
/// 1e-10 is an error.
pub fn tasep_case1_mpa<T: Scalar>(p: &TasepParams<T>) -> Result<MpaSpec<T>> {
    if p.alpha + p.beta <= T::one() {
        return Err(Error::TailNotSummable);
    }
    let spec = case1_spec_at(p, p.b_max)?;
    let larger = case1_spec_at(p, p.b_max + 5)?;
    let ln_z = spec.log_partition_function()?;
    let ln_z_ref = larger.log_partition_function()?;
    let rel = ((ln_z - ln_z_ref).exp() - T::one()).abs();
    if rel > cast(1e-10) {
        return Err(Error::TruncationNotConverged(rel.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(spec)
}

/// The closed-form bridge transition of the case-1 representation:
/// `P_{b,b} = 1/2`, `P_{b,b+1} = (b+2)/(4(b+1))`, `P_{b,b-1} = b/(4(b+1))`,
/// with the closed truncation folding the missing up-rate into the last
/// diagonal.
pub fn tasep_case1_transition<T: Scalar>(b_max: usize) -> StochasticMatrix<T> {
    let dim = b_max + 1;
    let mut m: Mat<T> = Mat::zeros(dim, dim);
    let half = cast::<T>(0.5);
    let four = cast::<T>(4.0);
    for b in 0..dim {
        let bf = cast::<T>(b as f64);
        let down = bf / (four * (bf + T::one()));
        let up = (bf + cast(2.0)) / (four * (bf + T::one()));
        if b > 0 {
            m.set(b, b - 1, down);
        }
        if b + 1 < dim {
            m.set(b, b, half);
            m.set(b, b + 1, up);
        } else {
            m.set(b, b, half + up);
        }
    }
    StochasticMatrix::new(m).expect("closed-form rows sum to one")
}

/// The local marginals of the case-1 mixture: up-steps emit a particle,
/// down-steps a hole, level steps a fair coin.
pub fn tasep_case1_kernel<T: Scalar>(b_max: usize) -> MarginalKernel<T> {
    let dim = b_max + 1;
    let half = cast::<T>(0.5);
    let mut probs = vec![T::zero(); dim * dim * 2];
    let mut reachable = vec![false; dim * dim];
    for b in 0..dim {
        for b2 in 0..dim {
            let base = b * dim + b2;
            if b2 == b {
                probs[base * 2] = half;
                probs[base * 2 + 1] = half;
                reachable[base] = true;
            } else if b2 + 1 == b {
                probs[base * 2] = T::one();
                reachable[base] = true;
            } else if b2 == b + 1 {
                probs[base * 2 + 1] = T::one();
                reachable[base] = true;
            } else {
                probs[base * 2] = half;
                probs[base * 2 + 1] = half;
            }
        }
    }
    MarginalKernel::new(dim, 2, probs, reachable).expect("closed-form kernel is valid")
}

/// Direct closed-form build of the case-1 mixture: transition as above,
/// `f_b = x_b/(b+1)`, `g_b = y_b (b+1)`, eigenvalue 4.
pub fn tasep_case1_mixture<T: Scalar>(p: &TasepParams<T>) -> Result<MixtureSpec<T>> {
    if p.alpha + p.beta <= T::one() {
        return Err(Error::TailNotSummable);
    }
    let dim = p.b_max + 1;
    let x = geometric_vector((T::one() - p.beta) / p.beta, dim);
    let y = geometric_vector((T::one() - p.alpha) / p.alpha, dim);
    let f: Vec<T> = x
        .iter()
        .enumerate()
        .map(|(b, xb)| *xb / cast::<T>((b + 1) as f64))
        .collect();
    let g: Vec<T> = y
        .iter()
        .enumerate()
        .map(|(b, yb)| *yb * cast::<T>((b + 1) as f64))
        .collect();
    let bridge = BridgeSpec::new(tasep_case1_transition(p.b_max), f, g, p.n + 1)?;
    MixtureSpec::new(bridge, tasep_case1_kernel(p.b_max), cast(4.0))
}

/// Letter matrices of the all-parameter representation on `{0..n+1}`:
/// M^0 is the pure subdiagonal, M^1 is upper triangular with row 0 scaled
/// by `1/beta`. Since `x = δ_0` pins the bridge at zero and down-steps are
/// single, states above `n+1` never contribute for words of length `n`;
/// the last column absorbs the geometric tail so `M e = λ e` with
/// `e_b = β^b`, `λ = 1/(β(1-β))` holds exactly.
fn general_matrices<T: Scalar>(p: &TasepParams<T>) -> (Mat<T>, Mat<T>) {
    let k = p.n + 1;
    let dim = k + 1;
    let beta = p.beta;
    let mut m0: Mat<T> = Mat::zeros(dim, dim);
    let mut m1: Mat<T> = Mat::zeros(dim, dim);
    for b in 1..dim {
        m0.set(b, b - 1, T::one());
    }
    let tail = T::one() / (T::one() - beta);
    for b2 in 0..k {
        m1.set(0, b2, T::one() / beta);
    }
    m1.set(0, k, tail / beta);
    for b in 1..dim {
        for b2 in b..k {
            m1.set(b, b2, T::one());
        }
        m1.set(b, k, tail);
    }
    (m0, m1)
}

/// Invariant measure of the open TASEP for any `0 < alpha <= 1`,
/// `0 < beta < 1` (`beta = 1` makes the eigenpair degenerate), with an
/// exactly finite hidden space.
pub fn tasep_general_mpa<T: Scalar>(p: &TasepParams<T>) -> Result<MpaSpec<T>> {
    if p.beta >= T::one() || p.beta <= T::zero() {
        return Err(Error::DegenerateParams("general representation needs 0 < beta < 1"));
    }
    let (m0, m1) = general_matrices(p);
    let dim = p.n + 2;
    let mut x = vec![T::zero(); dim];
    x[0] = T::one();
    let y = geometric_vector(T::one() / p.alpha, dim);
    MpaSpec::new(2, dim, vec![m0, m1], Boundary::Vectors { x, y }, p.n)
}

/// The closed-form eigenpair of the general representation:
/// `λ = 1/(β(1-β))`, `e_b = β^b`.
pub fn tasep_general_eigenpair<T: Scalar>(p: &TasepParams<T>) -> (T, Vec<T>) {
    let lambda = T::one() / (p.beta * (T::one() - p.beta));
    (lambda, geometric_vector(p.beta, p.n + 2))
}

/// Mixture of the general representation via the injected eigenpair:
/// `P_{0,k} = (1-β)β^k`, `P_{b,b+k} = (1-β)β^{k+1}` for `k >= -1`,
/// `g_b = (β/α)^b`, `f = δ_0`.
pub fn tasep_general_mixture<T: Scalar>(p: &TasepParams<T>) -> Result<MixtureSpec<T>> {
    let spec = tasep_general_mpa(p)?;
    let (lambda, evec) = tasep_general_eigenpair(p);
    crate::mixture::decompose_with_eigenpair(&spec, lambda, &evec)
}

/// Generator of the open TASEP on `{0,1}^n`: right hops at rate one on
/// (1,0) bonds, injection `alpha` at site 1, removal `beta` at site n.
pub fn tasep_generator<T: Scalar>(n: usize, alpha: T, beta: T) -> Result<GeneratorMatrix<T>> {
    if n == 0 || n > 20 {
        return Err(Error::TooLarge { size: 1u128 << n, limit: 1 << 20 });
    }
    let states = 1usize << n;
    // Site 1 is the highest bit, matching the big-endian word index used
    // by the enumeration oracles.
    let bit = |state: usize, site: usize| (state >> (n - 1 - site)) & 1;
    let flip = |state: usize, site: usize| state ^ (1 << (n - 1 - site));
    let mut rows = Vec::with_capacity(states);
    for eta in 0..states {
        let mut row = Vec::new();
        for i in 0..n - 1 {
            if bit(eta, i) == 1 && bit(eta, i + 1) == 0 {
                row.push((flip(flip(eta, i), i + 1), T::one()));
            }
        }
        if bit(eta, 0) == 0 {
            row.push((flip(eta, 0), alpha));
        }
        if bit(eta, n - 1) == 1 {
            row.push((flip(eta, n - 1), beta));
        }
        rows.push(row);
    }
    GeneratorMatrix::from_rates(rows)
}

/// Depth-first exploration walk of i.i.d. geometric branching trees: the
/// number of activated nodes after each exploration step. With branching
/// law `q_k = (1-β)β^k` this walk has the general-case bridge transition.
pub fn exploration_walk<T: Scalar, R: Rng + ?Sized>(
    beta: T,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if beta <= T::zero() || beta >= T::one() {
        return Err(Error::DegenerateParams("branching needs 0 < beta < 1"));
    }
    let ln_beta = beta.to_f64().unwrap().ln();
    let children = move |rng: &mut R| -> usize {
        // Geometric(1-β) on {0,1,...}: floor(ln U / ln β).
        let u: f64 = rng.random::<f64>();
        (u.ln() / ln_beta).floor() as usize
    };
    let mut path = Vec::with_capacity(steps + 1);
    let mut activated = 0usize;
    path.push(activated);
    for _ in 0..steps {
        if activated == 0 {
            // Move to the next root and activate its children.
            activated = children(rng);
        } else {
            // Explore one activated node, activate its progeny.
            activated = activated - 1 + children(rng);
        }
        path.push(activated);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{decompose, decompose_default, znrelation_check};
    use crate::oracle::{self, enumerate_measure, max_abs_diff, stationarity_residual};
    use crate::spectral::eigen_residual;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn params(alpha: f64, beta: f64, n: usize, b_max: usize) -> TasepParams<f64> {
        TasepParams::new(alpha, beta, n, b_max).unwrap()
    }

    #[test]
    fn case1_requires_summable_tails() {
        let p = params(0.3, 0.4, 3, 30);
        assert!(matches!(tasep_case1_mpa(&p), Err(Error::TailNotSummable)));
    }

    #[test]
    fn case1_closed_truncation_is_an_exact_eigenpair() {
        let (m0, m1) = case1_matrices::<f64>(17);
        let mut m = m0.clone();
        for b in 0..18 {
            for b2 in 0..18 {
                m.set(b, b2, m.get(b, b2) + m1.get(b, b2));
            }
        }
        let e: Vec<f64> = (0..18).map(|b| (b + 1) as f64).collect();
        assert!(eigen_residual(&m, 4.0, &e) < 1e-15);
    }

    #[test]
    fn case1_boundary_parameters_one_pin_the_walk() {
        let p = params(1.0, 1.0, 3, 20);
        let spec = tasep_case1_mpa(&p).unwrap();
        // x = y = δ_0: only paths pinned at 0 contribute.
        let z = spec.partition_function().unwrap();
        assert!(z > 0.0);
        let mix = decompose_default(&spec).unwrap();
        assert!((mix.bridge().end_weight()[1]).abs() < 1e-30);
    }

    #[test]
    fn case1_decompose_matches_closed_form() {
        let p = params(0.75, 0.75, 3, 24);
        let spec = tasep_case1_mpa(&p).unwrap();
        let by_iteration = decompose(&spec, 1e-13).unwrap().with_normalized_end_weight().unwrap();
        let closed = tasep_case1_mixture(&p).unwrap().with_normalized_end_weight().unwrap();
        assert!((by_iteration.lambda() - 4.0).abs() < 1e-10);
        let pa = by_iteration.bridge().transition().mat();
        let pb = closed.bridge().transition().mat();
        let mut worst = 0.0f64;
        for b in 0..25 {
            for b2 in 0..25 {
                worst = worst.max((pa.get(b, b2) - pb.get(b, b2)).abs());
            }
        }
        assert!(worst < 1e-10, "transition deviation {worst:e}");
        assert!(by_iteration.kernel().max_abs_diff(closed.kernel()) < 1e-10);
        for b in 0..25 {
            assert!((by_iteration.bridge().end_weight()[b] - closed.bridge().end_weight()[b]).abs() < 1e-10);
            assert!((by_iteration.bridge().start_weight()[b] - closed.bridge().start_weight()[b]).abs() < 1e-10);
        }
        // Spot-check the closed-form values.
        assert!((pb.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((pb.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((pb.get(3, 4) - 5.0 / 16.0).abs() < 1e-15);
        assert!((pb.get(3, 2) - 3.0 / 16.0).abs() < 1e-15);
        // Kernel of the closed form: up = particle, down = hole, level = coin.
        let k = closed.kernel();
        assert_eq!(k.prob(2, 3, 1), 1.0);
        assert_eq!(k.prob(2, 1, 0), 1.0);
        assert_eq!(k.prob(2, 2, 0), 0.5);
    }

    #[test]
    fn case1_fg_vectors_follow_the_closed_form() {
        let p = params(0.75, 0.6, 4, 12);
        let mix = tasep_case1_mixture(&p).unwrap();
        let f = mix.bridge().end_weight();
        let g = mix.bridge().start_weight();
        let xr: f64 = (1.0 - 0.6) / 0.6;
        let yr: f64 = (1.0 - 0.75) / 0.75;
        for b in 0..=12usize {
            assert!((f[b] - xr.powi(b as i32) / (b + 1) as f64).abs() < 1e-14);
            assert!((g[b] - yr.powi(b as i32) * (b + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn case1_znrelation() {
        let p = params(0.7, 0.8, 4, 40);
        let spec = tasep_case1_mpa(&p).unwrap();
        let mix = tasep_case1_mixture(&p).unwrap();
        assert!(znrelation_check(&spec, &mix).unwrap() < 1e-8);
    }

    #[test]
    fn general_matrices_satisfy_closed_form_doob() {
        let p = params(0.7, 0.8, 4, 6);
        let spec = tasep_general_mpa(&p).unwrap();
        let (lambda, evec) = tasep_general_eigenpair(&p);
        assert!(eigen_residual(spec.m_total(), lambda, &evec) < 1e-14);
        let mix = tasep_general_mixture(&p).unwrap();
        let pm = mix.bridge().transition().mat();
        let beta: f64 = 0.8;
        // P_{0,k} = (1-β)β^k away from the absorbing last column.
        for k in 0..=4usize {
            assert!((pm.get(0, k) - (1.0 - beta) * beta.powi(k as i32)).abs() < 1e-14);
        }
        // P_{b,b+k} = (1-β)β^{k+1}, k >= -1.
        for b in 1..=4usize {
            assert!((pm.get(b, b - 1) - (1.0 - beta)).abs() < 1e-14);
            for k in 0..=(4 - b) {
                assert!((pm.get(b, b + k) - (1.0 - beta) * beta.powi(k as i32 + 1)).abs() < 1e-14);
            }
        }
        // Kernel: down-steps are holes, all other reachable steps particles.
        let kern = mix.kernel();
        for b in 1..6usize {
            assert_eq!(kern.prob(b, b - 1, 0), 1.0);
        }
        for b in 0..6usize {
            for b2 in b..6usize {
                assert_eq!(kern.prob(b, b2, 1), 1.0);
            }
        }
        // g_b = (β/α)^b, f = δ_0 (e_0 = 1 so no rescale at all).
        let g = mix.bridge().start_weight();
        for b in 0..6usize {
            assert!((g[b] - (beta / 0.7f64).powi(b as i32)).abs() < 1e-12);
        }
        assert_eq!(mix.bridge().end_weight()[0], 1.0);
        assert!(mix.bridge().end_weight()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn general_rejects_degenerate_beta() {
        let p = params(0.5, 1.0, 3, 10);
        assert!(matches!(tasep_general_mpa(&p), Err(Error::DegenerateParams(_))));
    }

    #[test]
    fn representations_agree_on_overlap() {
        for n in 2..=5usize {
            let p = params(0.7, 0.8, n, 40);
            let a = enumerate_measure(&tasep_case1_mpa(&p).unwrap(), 1 << 22).unwrap();
            let b = enumerate_measure(&tasep_general_mpa(&p).unwrap(), 1 << 22).unwrap();
            assert!(max_abs_diff(&a, &b).unwrap() < 1e-9);
        }
    }

    #[test]
    fn generator_is_conservative_and_has_correct_single_site_balance() {
        let l = tasep_generator(1, 0.3, 0.7).unwrap();
        // Two-state birth-death: stationary mass alpha/(alpha+beta) on 1.
        let d = oracle::ExactDistribution::from_weights(1, 2, vec![0.7, 0.3]).unwrap();
        assert!(stationarity_residual(&d, &l).unwrap() < 1e-15);
        let l2 = tasep_generator(2, 0.4, 0.9).unwrap();
        for i in 0..4usize {
            let mut sum: f64 = l2.rate(i, i);
            for &(_, r) in l2.off_diagonal(i) {
                sum += r;
            }
            assert!(sum.abs() < 1e-14);
        }
    }

    #[test]
    fn mpa_measures_are_stationary_for_the_generator() {
        for (alpha, beta) in [(0.7, 0.8), (0.3, 0.4)] {
            for n in [3usize, 4] {
                let p = params(alpha, beta, n, n + 36);
                let l = tasep_generator(n, alpha, beta).unwrap();
                let d = enumerate_measure(&tasep_general_mpa(&p).unwrap(), 1 << 22).unwrap();
                let r = stationarity_residual(&d, &l).unwrap();
                assert!(r < 1e-8, "general residual {r:e} at ({alpha},{beta}), n={n}");
            }
        }
        let p = params(0.7, 0.8, 3, 40);
        let l = tasep_generator(3, 0.7, 0.8).unwrap();
        let d = enumerate_measure(&tasep_case1_mpa(&p).unwrap(), 1 << 22).unwrap();
        assert!(stationarity_residual(&d, &l).unwrap() < 1e-8);
    }

    #[test]
    fn exploration_walk_zero_branching_stays_at_origin() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let path = exploration_walk(1e-12, 1000, &mut rng).unwrap();
        assert!(path.iter().all(|&z| z == 0));
    }

    #[test]
    fn exploration_walk_transition_frequencies_match_bridge_rows() {
        let beta = 0.45f64;
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let path = exploration_walk(beta, 100_000, &mut rng).unwrap();
        // Expected row: from 0, P(k) = (1-β)β^k; from b >= 1, P(b-1+k) = (1-β)β^k.
        let mut by_source: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for w in path.windows(2) {
            by_source.entry(w[0]).or_default().push(w[1]);
        }
        let mut tested = 0;
        for (&b, targets) in by_source.iter() {
            if targets.len() < 2000 {
                continue;
            }
            tested += 1;
            let kmax = 12usize;
            let mut counts = vec![0usize; kmax + 1];
            for &t in targets {
                let k = if b == 0 { t } else { t + 1 - b };
                counts[k.min(kmax)] += 1;
            }
            let mut expected: Vec<f64> = (0..kmax).map(|k| (1.0 - beta) * beta.powi(k as i32)).collect();
            expected.push(beta.powi(kmax as i32));
            let pval = crate::stats::chi_square_pvalue(&counts, &expected);
            assert!(pval > 0.001, "state {b}: p = {pval}");
        }
        assert!(tested >= 2);
    }
}
