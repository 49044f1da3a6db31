//! Two-class TASEP on a ring: trace-form matrix product measures, the
//! pinned-bridge mixture of the anchored measures (a second-class particle
//! fixed at one site), grand-canonical averaging, canonical conditioning on
//! particle counts, the exchange generator, and exact samplers.

use rand::Rng;

use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mixture::{MarginalKernel, MixtureSpec};
use crate::mpa::{Boundary, MpaSpec, Word};
use crate::oracle::{self, ExactDistribution, GeneratorMatrix};
use crate::scalar::{cast, Scalar};
use crate::spectral::{exact_doob_from_closed_form, NonNegMatrix, StochasticMatrix};

/// Ring size and conserved particle counts (`n1` first class, `n2` second
/// class; at least one second-class particle, `n1 + n2 <= n`).
#[derive(Clone, Copy, Debug)]
pub struct RingParams {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
}

impl RingParams {
    pub fn new(n: usize, n1: usize, n2: usize) -> Result<Self> {
        if n < 2 || n2 == 0 || n1 + n2 > n {
            return Err(Error::InvalidCounts);
        }
        Ok(RingParams { n, n1, n2 })
    }
}

/// Letter matrices of the two-class representation truncated to
/// `{0..b_max}`: M^0 lower bidiagonal, M^1 upper bidiagonal, M^2 the single
/// entry at (0,0). The truncation is closed at the last diagonal (split
/// between M^0 and M^1) so every row of `M` sums to 4; since every word
/// with a second-class particle pins the hidden path at 0, states at the
/// boundary never contribute for `b_max >= n`.
pub fn two_class_matrices<T: Scalar>(b_max: usize) -> Vec<Mat<T>> {
    let dim = b_max + 1;
    let mut m0: Mat<T> = Mat::zeros(dim, dim);
    let mut m1: Mat<T> = Mat::zeros(dim, dim);
    let mut m2: Mat<T> = Mat::zeros(dim, dim);
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
    m2.set(0, 0, T::one());
    let half = cast::<T>(0.5);
    m0.set(b_max, b_max, T::one() + half);
    m1.set(b_max, b_max, T::one() + half);
    vec![m0, m1, m2]
}

fn summed<T: Scalar>(matrices: &[Mat<T>]) -> Mat<T> {
    let dim = matrices[0].rows();
    let mut m = Mat::zeros(dim, dim);
    for part in matrices {
        for b in 0..dim {
            for b2 in 0..dim {
                m.set(b, b2, *m.get(b, b2) + *part.get(b, b2));
            }
        }
    }
    m
}

/// The Doob transition of the ring representation (`λ = 4`, constant
/// eigenvector): 3/4 and 1/4 out of state 0, otherwise the lazy walk
/// 1/4, 1/2, 1/4 with the closed boundary row.
pub fn ring_transition<T: Scalar>(b_max: usize) -> StochasticMatrix<T> {
    let matrices = two_class_matrices::<T>(b_max);
    let m = NonNegMatrix::new(summed(&matrices)).expect("ring matrices are nonnegative");
    let e = vec![T::one(); b_max + 1];
    exact_doob_from_closed_form(&m, cast(4.0), &e).expect("row sums are exactly 4")
}

/// The ring kernel: `p_{0,0}` uniform on {hole, first, second};
/// level steps elsewhere a fair hole/first coin; up-steps first class,
/// down-steps holes.
pub fn ring_kernel<T: Scalar>(b_max: usize) -> MarginalKernel<T> {
    let matrices = two_class_matrices::<T>(b_max);
    MarginalKernel::from_matrices(&matrices, &summed(&matrices)).expect("valid kernel")
}

/// The pinned-bridge mixture behind the anchored measures: hidden paths of
/// length `n` pinned at 0 on both ends (the two dual edges at the anchor),
/// word length `n - 1`.
pub fn ring_mixture<T: Scalar>(n: usize) -> Result<MixtureSpec<T>> {
    if n < 2 {
        return Err(Error::InvalidCounts);
    }
    let b_max = n;
    let bridge = BridgeSpec::pinned(ring_transition(b_max), 0, 0, n)?;
    MixtureSpec::new(bridge, ring_kernel(b_max), cast(4.0))
}

fn rotate_to_anchor(word: &[u8], anchor: usize) -> Word {
    // Read the word in the frame where `anchor` (0-based) becomes the last
    // position: out[i] = word[(i + anchor + 1) mod n].
    let n = word.len();
    (0..n).map(|i| word[(i + anchor + 1) % n]).collect()
}

/// The anchored measure: second-class particle fixed at (1-based) site `j`,
/// remaining sites drawn from the pinned-bridge mixture.
pub fn anchored_measure<T: Scalar>(n: usize, j: usize) -> Result<ExactDistribution<T>> {
    if j < 1 || j > n {
        return Err(Error::IndexOutOfRange);
    }
    let size = oracle_size(n)?;
    let mix = ring_mixture::<T>(n)?;
    let mut table = vec![T::zero(); size];
    for idx in 0..size {
        let word = oracle::decode_word(3, n, idx);
        let aligned = rotate_to_anchor(&word, j - 1);
        if aligned[n - 1] != 2 {
            continue;
        }
        table[idx] = mix.probability(&aligned[..n - 1])?;
    }
    ExactDistribution::from_weights(n, 3, table)
}

fn oracle_size(n: usize) -> Result<usize> {
    if n > 12 {
        return Err(Error::TooLarge { size: 3u128.pow(n as u32), limit: 3u128.pow(12) });
    }
    Ok(3usize.pow(n as u32))
}

/// Translation-invariant grand-canonical measure: uniform mixture of the
/// anchored measures over the anchor site.
pub fn grand_canonical_measure<T: Scalar>(n: usize) -> Result<ExactDistribution<T>> {
    let size = oracle_size(n)?;
    let mut table = vec![T::zero(); size];
    for j in 1..=n {
        let d = anchored_measure::<T>(n, j)?;
        for idx in 0..size {
            table[idx] = table[idx] + d.prob(idx);
        }
    }
    ExactDistribution::from_weights(n, 3, table)
}

fn counts(word: &[u8]) -> (usize, usize) {
    let n1 = word.iter().filter(|&&a| a == 1).count();
    let n2 = word.iter().filter(|&&a| a == 2).count();
    (n1, n2)
}

/// The extremal invariant measure with fixed particle counts, obtained by
/// conditioning the grand-canonical measure on its conserved sector.
pub fn canonical_measure<T: Scalar>(p: &RingParams) -> Result<ExactDistribution<T>> {
    grand_canonical_measure::<T>(p.n)?.condition(|w| counts(w) == (p.n1, p.n2))
}

/// Direct trace-form oracle for the anchored measure
/// (`Tr[∏ M^{η_i}] 1(η_j = 2)`, normalized).
pub fn trace_measure_anchored<T: Scalar>(n: usize, j: usize) -> Result<ExactDistribution<T>> {
    let size = oracle_size(n)?;
    let spec = trace_spec::<T>(n)?;
    let mut table = vec![T::zero(); size];
    for idx in 0..size {
        let word = oracle::decode_word(3, n, idx);
        if word[j - 1] != 2 {
            continue;
        }
        table[idx] = spec.unnormalized_weight(&word)?;
    }
    ExactDistribution::from_weights(n, 3, table)
}

/// Direct trace-form oracle for the canonical measure.
pub fn trace_measure_canonical<T: Scalar>(p: &RingParams) -> Result<ExactDistribution<T>> {
    let size = oracle_size(p.n)?;
    let spec = trace_spec::<T>(p.n)?;
    let mut table = vec![T::zero(); size];
    for idx in 0..size {
        let word = oracle::decode_word(3, p.n, idx);
        if counts(&word) != (p.n1, p.n2) {
            continue;
        }
        table[idx] = spec.unnormalized_weight(&word)?;
    }
    ExactDistribution::from_weights(p.n, 3, table)
}

fn trace_spec<T: Scalar>(n: usize) -> Result<MpaSpec<T>> {
    MpaSpec::new(3, n + 1, two_class_matrices(n), Boundary::Trace, n)
}

/// Exchange generator of the two-class ring TASEP on `{0,1,2}^n`: swap
/// across each (cyclic) bond at rate one when the priority decreases,
/// with priorities hole < second class < first class.
pub fn ring_generator<T: Scalar>(n: usize) -> Result<GeneratorMatrix<T>> {
    if n > 8 {
        return Err(Error::TooLarge { size: 3u128.pow(n as u32), limit: 3u128.pow(8) });
    }
    let priority = [0u8, 2, 1];
    let states = 3usize.pow(n as u32);
    let mut rows = Vec::with_capacity(states);
    for idx in 0..states {
        let word = oracle::decode_word(3, n, idx);
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..n {
            let ip = (i + 1) % n;
            if priority[word[i] as usize] > priority[word[ip] as usize] {
                let mut swapped = word.clone();
                swapped.swap(i, ip);
                let target = oracle::encode_word(3, &swapped);
                match row.iter_mut().find(|(j, _)| *j == target) {
                    Some((_, r)) => *r = *r + T::one(),
                    None => row.push((target, T::one())),
                }
            }
        }
        rows.push(row);
    }
    GeneratorMatrix::from_rates(rows)
}

/// One grand-canonical sample: bridge path, letters from the kernel, the
/// anchor second-class particle appended, then a uniform rotation.
pub fn sample_grand<T: Scalar, R: Rng + ?Sized>(
    mix: &MixtureSpec<T>,
    table: &crate::bridge::BackwardTable<T>,
    rng: &mut R,
) -> Word {
    let (mut word, _path) = mix.sample_configuration(table, rng);
    word.push(2);
    let n = word.len();
    let shift = rng.random_range(0..n);
    (0..n).map(|i| word[(i + n - shift) % n]).collect()
}

/// One canonical sample: rejection from the grand-canonical sampler until
/// the conserved counts match.
pub fn sample_canonical<T: Scalar, R: Rng + ?Sized>(
    p: &RingParams,
    mix: &MixtureSpec<T>,
    table: &crate::bridge::BackwardTable<T>,
    rng: &mut R,
) -> Word {
    loop {
        let word = sample_grand(mix, table, rng);
        if counts(&word) == (p.n1, p.n2) {
            return word;
        }
    }
}
