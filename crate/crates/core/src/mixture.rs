//! Canonical mixture form of a matrix product measure: a Markov bridge over
//! hidden states with local marginals `p_{b,b'}(a) = M^a_{b,b'} / M_{b,b'}`,
//! linked to the MPA by the generalized Doob transform. Includes the
//! decomposition itself, transfer-matrix evaluation, exact sampling, the
//! coupling measure, moments via the hidden chain, equivalence-class
//! canonicalization and the stationary / one-dependent special cases.

use rand::Rng;

use crate::bridge::{sample_categorical, BackwardTable, BridgeSpec, Path};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::mpa::{Boundary, MpaSpec, Word};
use crate::scalar::{cast, Scalar};
use crate::spectral::{
    doob_transform, exact_doob_from_closed_form, invariant_distribution, perron, NonNegMatrix,
    StochasticMatrix, PERRON_MAX_ITER, PERRON_TOL,
};

/// Per-pair letter distributions `p_{b,b'}(·)`.
///
/// Pairs with `M_{b,b'} = 0` cannot occur under the bridge (the Doob
/// transform gives them `P_{b,b'} = 0`); they carry a flagged uniform
/// sentinel so the storage stays dense.
#[derive(Clone, Debug)]
pub struct MarginalKernel<T> {
    states: usize,
    alphabet: usize,
    probs: Vec<T>,
    reachable: Vec<bool>,
}

impl<T: Scalar> MarginalKernel<T> {
    pub fn new(states: usize, alphabet: usize, probs: Vec<T>, reachable: Vec<bool>) -> Result<Self> {
        if probs.len() != states * states * alphabet || reachable.len() != states * states {
            return Err(Error::ShapeMismatch);
        }
        let kernel = MarginalKernel { states, alphabet, probs, reachable };
        let tol = cast::<T>(1e-12);
        for b in 0..states {
            for b2 in 0..states {
                let d = kernel.dist(b, b2);
                if d.iter().any(|p| !p.is_finite() || *p < T::zero() || *p > T::one() + tol) {
                    return Err(Error::InvalidSpec("kernel entries must lie in [0,1]".into()));
                }
                if kernel.is_reachable(b, b2) {
                    let s: T = d.iter().copied().sum();
                    if (s - T::one()).abs() > tol {
                        return Err(Error::InvalidSpec(format!(
                            "kernel at ({b},{b2}) sums to {s} instead of 1"
                        )));
                    }
                }
            }
        }
        Ok(kernel)
    }

    /// Kernel of Eq.-style `p_{b,b'}(a) = M^a_{b,b'} / M_{b,b'}` from letter
    /// matrices and their sum.
    pub fn from_matrices(matrices: &[Mat<T>], m_total: &Mat<T>) -> Result<Self> {
        let states = m_total.rows();
        let alphabet = matrices.len();
        if alphabet == 0 || matrices.iter().any(|m| m.rows() != states || m.cols() != states) {
            return Err(Error::ShapeMismatch);
        }
        let uniform = T::one() / cast::<T>(alphabet as f64);
        let mut probs = vec![T::zero(); states * states * alphabet];
        let mut reachable = vec![false; states * states];
        for b in 0..states {
            for b2 in 0..states {
                let total = *m_total.get(b, b2);
                let base = (b * states + b2) * alphabet;
                if total > T::zero() {
                    reachable[b * states + b2] = true;
                    for (a, m) in matrices.iter().enumerate() {
                        probs[base + a] = *m.get(b, b2) / total;
                    }
                } else {
                    for a in 0..alphabet {
                        probs[base + a] = uniform;
                    }
                }
            }
        }
        Self::new(states, alphabet, probs, reachable)
    }

    pub fn state_size(&self) -> usize {
        self.states
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn prob(&self, b: usize, b2: usize, a: u8) -> T {
        self.probs[(b * self.states + b2) * self.alphabet + a as usize]
    }

    #[inline]
    pub fn dist(&self, b: usize, b2: usize) -> &[T] {
        let base = (b * self.states + b2) * self.alphabet;
        &self.probs[base..base + self.alphabet]
    }

    #[inline]
    pub fn is_reachable(&self, b: usize, b2: usize) -> bool {
        self.reachable[b * self.states + b2]
    }

    /// Mean letter code `V_{b,b'} = Σ_a p_{b,b'}(a) · a`.
    pub fn mean_letter(&self, b: usize, b2: usize) -> T {
        self.dist(b, b2)
            .iter()
            .enumerate()
            .map(|(a, p)| *p * cast::<T>(a as f64))
            .sum()
    }

    pub fn max_abs_diff(&self, other: &MarginalKernel<T>) -> T {
        assert_eq!(self.states, other.states);
        assert_eq!(self.alphabet, other.alphabet);
        self.probs
            .iter()
            .zip(&other.probs)
            .zip(self.reachable.iter().flat_map(|r| std::iter::repeat(*r).take(self.alphabet)))
            .filter(|(_, r)| *r)
            .map(|((a, b), _)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// The canonical form of a measure of MPA type: bridge + kernel, with the
/// Perron eigenvalue carried along for the `g^T P^N f = Z_N / λ^N` relation.
#[derive(Clone, Debug)]
pub struct MixtureSpec<T> {
    bridge: BridgeSpec<T>,
    kernel: MarginalKernel<T>,
    lambda: T,
}

impl<T: Scalar> MixtureSpec<T> {
    pub fn new(bridge: BridgeSpec<T>, kernel: MarginalKernel<T>, lambda: T) -> Result<Self> {
        if kernel.state_size() != bridge.dim() {
            return Err(Error::ShapeMismatch);
        }
        if bridge.len() < 2 {
            return Err(Error::InvalidSpec("mixture needs at least one word letter".into()));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidSpec("lambda must be positive".into()));
        }
        Ok(MixtureSpec { bridge, kernel, lambda })
    }

    pub fn bridge(&self) -> &BridgeSpec<T> {
        &self.bridge
    }

    pub fn kernel(&self) -> &MarginalKernel<T> {
        &self.kernel
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn word_length(&self) -> usize {
        self.bridge.steps()
    }

    /// Same mixture with `Σ f = 1`; `g` absorbs the reciprocal scale. Kills
    /// the eigenvector-scale freedom so mixtures can be compared entrywise.
    pub fn with_normalized_end_weight(&self) -> Result<Self> {
        let s: T = self.bridge.end_weight().iter().copied().sum();
        let f: Vec<T> = self.bridge.end_weight().iter().map(|x| *x / s).collect();
        let g: Vec<T> = self.bridge.start_weight().iter().map(|x| *x * s).collect();
        let bridge = BridgeSpec::new(self.bridge.transition().clone(), f, g, self.bridge.len())?;
        MixtureSpec::new(bridge, self.kernel.clone(), self.lambda)
    }

    fn check_word(&self, word: &[u8]) -> Result<()> {
        if word.len() != self.word_length() {
            return Err(Error::LengthMismatch { expected: self.word_length(), got: word.len() });
        }
        if !crate::mpa::letters_valid(self.kernel.alphabet_size(), word) {
            return Err(Error::InvalidSpec("letter outside alphabet".into()));
        }
        Ok(())
    }

    /// `ν_N(η)` by the transfer contraction
    /// `g^T ∏_i (P ∘ p(·,·,η_i)) f / (g^T P^N f)` — algebraically equal to
    /// the literal hidden-path sum.
    pub fn probability(&self, word: &[u8]) -> Result<T> {
        self.check_word(word)?;
        let dim = self.bridge.dim();
        let p = self.bridge.transition().mat();
        let mut v = self.bridge.start_weight().to_vec();
        let mut ln_scale = T::zero();
        for &a in word {
            let mut next = vec![T::zero(); dim];
            for b in 0..dim {
                if v[b] == T::zero() {
                    continue;
                }
                for b2 in 0..dim {
                    let w = *p.get(b, b2);
                    if w == T::zero() {
                        continue;
                    }
                    next[b2] = next[b2] + v[b] * w * self.kernel.prob(b, b2, a);
                }
            }
            let mx = next.iter().fold(T::zero(), |acc, x| acc.max(*x));
            if mx == T::zero() {
                return Ok(T::zero());
            }
            for x in next.iter_mut() {
                *x = *x / mx;
            }
            ln_scale = ln_scale + mx.ln();
            v = next;
        }
        let num = dot(&v, self.bridge.end_weight());
        if num <= T::zero() {
            return Ok(T::zero());
        }
        let table = self.bridge.backward_table()?;
        Ok((num.ln() + ln_scale - self.bridge.log_normalizer(&table)).exp())
    }

    /// Draw `(η, ζ)`: a bridge path, then conditionally independent letters
    /// `η_i ~ p_{ζ_i, ζ_{i+1}}`.
    pub fn sample_configuration<R: Rng + ?Sized>(
        &self,
        table: &BackwardTable<T>,
        rng: &mut R,
    ) -> (Word, Path) {
        let path = self.bridge.sample_path(table, rng);
        let word = self.sample_word_given_path(&path, rng);
        (word, path)
    }

    /// Letters conditionally on a hidden path.
    pub fn sample_word_given_path<R: Rng + ?Sized>(&self, path: &[usize], rng: &mut R) -> Word {
        path.windows(2)
            .map(|w| {
                debug_assert!(
                    self.kernel.is_reachable(w[0], w[1]),
                    "bridge proposed an unreachable pair"
                );
                sample_categorical(self.kernel.dist(w[0], w[1]), rng) as u8
            })
            .collect()
    }

    /// Joint coupling probability `C_N(η, ζ) = ρ(ζ) ∏ p_{ζi,ζi+1}(η_i)`.
    pub fn coupling_probability(&self, word: &[u8], path: &[usize]) -> Result<T> {
        self.check_word(word)?;
        if path.len() != self.bridge.len() {
            return Err(Error::LengthMismatch { expected: self.bridge.len(), got: path.len() });
        }
        let rho = self.bridge.path_probability(path)?;
        let mut prod = T::one();
        for (i, w) in path.windows(2).enumerate() {
            prod = prod * self.kernel.prob(w[0], w[1], word[i]);
        }
        Ok(rho * prod)
    }

    /// `E[η_i]` with letters read as their integer codes, computed through
    /// the hidden chain: `E_ρ[V_{ζ_i, ζ_{i+1}}]`.
    pub fn site_mean(&self, i: usize) -> Result<T> {
        let n = self.word_length();
        if i < 1 || i > n {
            return Err(Error::IndexOutOfRange);
        }
        let (num, den) = self.weighted_contraction(&[i])?;
        Ok(num / den)
    }

    /// `E[η_i η_j] = E_ρ[V_{ζi,ζi+1} V_{ζj,ζj+1}]` for `i != j` (arguments in
    /// either order).
    pub fn correlation(&self, i: usize, j: usize) -> Result<T> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.word_length();
        if i < 1 || j > n || i == j {
            return Err(Error::IndexOutOfRange);
        }
        let (num, den) = self.weighted_contraction(&[i, j])?;
        Ok(num / den)
    }

    /// Contract `g^T A_1 A_2 ... A_N f` twice, where `A_k = P ∘ V` at the
    /// marked steps and `A_k = P` elsewhere (numerator), resp. `A_k = P`
    /// everywhere (denominator). The common scaling cancels in the ratio.
    fn weighted_contraction(&self, marked: &[usize]) -> Result<(T, T)> {
        let p = self.bridge.transition().mat();
        let dim = self.bridge.dim();
        let mut num = self.bridge.start_weight().to_vec();
        let mut den = num.clone();
        let mut ln_num = T::zero();
        let mut ln_den = T::zero();
        for k in 1..=self.word_length() {
            let weighted = marked.contains(&k);
            let mut nn = vec![T::zero(); dim];
            let mut nd = vec![T::zero(); dim];
            for b in 0..dim {
                for b2 in 0..dim {
                    let w = *p.get(b, b2);
                    if w == T::zero() {
                        continue;
                    }
                    nd[b2] = nd[b2] + den[b] * w;
                    let wv = if weighted { w * self.kernel.mean_letter(b, b2) } else { w };
                    nn[b2] = nn[b2] + num[b] * wv;
                }
            }
            let rescale = |v: &mut Vec<T>, ln: &mut T| {
                let mx = v.iter().fold(T::zero(), |a, x| a.max(x.abs()));
                if mx > T::zero() {
                    for x in v.iter_mut() {
                        *x = *x / mx;
                    }
                    *ln = *ln + mx.ln();
                }
            };
            num = nn;
            den = nd;
            rescale(&mut num, &mut ln_num);
            rescale(&mut den, &mut ln_den);
        }
        let f = self.bridge.end_weight();
        let dnum = dot(&num, f);
        let dden = dot(&den, f);
        if dden <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        let scale = (ln_num - ln_den).exp();
        Ok((dnum * scale, dden))
    }
}

/// Decomposition of a vector-boundary MPA spec into its canonical mixture:
/// Perron pair of `M`, Doob transform `P`, end weights `f = x/e`, `g = y∘e`,
/// and the local kernel.
pub fn decompose<T: Scalar>(spec: &MpaSpec<T>, tol: T) -> Result<MixtureSpec<T>> {
    let (x, y) = match spec.boundary() {
        Boundary::Vectors { x, y } => (x, y),
        Boundary::Trace => {
            return Err(Error::InvalidSpec(
                "decomposition requires the vector-boundary form".into(),
            ))
        }
    };
    let m = NonNegMatrix::new(spec.m_total().clone())?;
    let pair = perron(&m, tol, PERRON_MAX_ITER)?;
    let p = doob_transform(&m, &pair)?;
    build_mixture(spec, x, y, p, pair.lambda, &pair.evec)
}

pub fn decompose_default<T: Scalar>(spec: &MpaSpec<T>) -> Result<MixtureSpec<T>> {
    decompose(spec, cast(PERRON_TOL))
}

/// Decomposition with an analytically known eigenpair instead of the power
/// iteration (used by the model constructors whose eigenpairs are exact).
pub fn decompose_with_eigenpair<T: Scalar>(
    spec: &MpaSpec<T>,
    lambda: T,
    evec: &[T],
) -> Result<MixtureSpec<T>> {
    let (x, y) = match spec.boundary() {
        Boundary::Vectors { x, y } => (x, y),
        Boundary::Trace => {
            return Err(Error::InvalidSpec(
                "decomposition requires the vector-boundary form".into(),
            ))
        }
    };
    let m = NonNegMatrix::new(spec.m_total().clone())?;
    let p = exact_doob_from_closed_form(&m, lambda, evec)?;
    build_mixture(spec, x, y, p, lambda, evec)
}

fn build_mixture<T: Scalar>(
    spec: &MpaSpec<T>,
    x: &[T],
    y: &[T],
    p: StochasticMatrix<T>,
    lambda: T,
    evec: &[T],
) -> Result<MixtureSpec<T>> {
    let f: Vec<T> = x.iter().zip(evec).map(|(xb, eb)| *xb / *eb).collect();
    let g: Vec<T> = y.iter().zip(evec).map(|(yb, eb)| *yb * *eb).collect();
    let bridge = BridgeSpec::new(p, f, g, spec.word_length() + 1)?;
    let kernel = MarginalKernel::from_matrices(spec.matrices(), spec.m_total())?;
    MixtureSpec::new(bridge, kernel, lambda)
}

/// Relative error of the identity `g^T P^N f = Z_N / λ^N`.
pub fn znrelation_check<T: Scalar>(spec: &MpaSpec<T>, mix: &MixtureSpec<T>) -> Result<T> {
    let table = mix.bridge().backward_table()?;
    let ln_lhs = mix.bridge().log_normalizer(&table);
    let n = cast::<T>(spec.word_length() as f64);
    let ln_rhs = spec.log_partition_function()? - n * mix.lambda().ln();
    Ok(((ln_lhs - ln_rhs).exp() - T::one()).abs())
}

/// Canonical record of the equivalence class of an MPA spec: the Doob
/// stochastic matrix, the kernel, and end weights normalized so `Σf = 1`.
/// Two specs related by the scale family (any λ > 0, any positive e) and by
/// positive rescalings of x, y map to the same record.
#[derive(Clone, Debug)]
pub struct CanonicalForm<T> {
    pub p: StochasticMatrix<T>,
    pub kernel: MarginalKernel<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
}

impl<T: Scalar> CanonicalForm<T> {
    pub fn max_abs_diff(&self, other: &CanonicalForm<T>) -> T {
        let mut worst = self.kernel.max_abs_diff(&other.kernel);
        for (a, b) in self.p.mat().iter().zip(other.p.mat().iter()) {
            worst = worst.max((*a - *b).abs());
        }
        for (a, b) in self.f.iter().zip(&other.f) {
            worst = worst.max((*a - *b).abs());
        }
        for (a, b) in self.g.iter().zip(&other.g) {
            worst = worst.max((*a - *b).abs());
        }
        worst
    }
}

/// Decompose and normalize all scale freedom away: the eigenvector is
/// summed to one inside the decomposition, and both end weights are fixed
/// to `Σf = Σg = 1` (the bridge law is invariant under independent positive
/// rescalings of `f` and `g`, so this is measure-preserving).
pub fn canonicalize<T: Scalar>(spec: &MpaSpec<T>) -> Result<CanonicalForm<T>> {
    let mix = decompose_default(spec)?;
    let normalize = |v: &[T]| -> Vec<T> {
        let s: T = v.iter().copied().sum();
        v.iter().map(|x| *x / s).collect()
    };
    Ok(CanonicalForm {
        p: mix.bridge().transition().clone(),
        kernel: mix.kernel().clone(),
        f: normalize(mix.bridge().end_weight()),
        g: normalize(mix.bridge().start_weight()),
    })
}

/// Bridge whose marginals are site-independent: `g = π` (invariant law of
/// `P`), `f = 1`.
pub fn stationary_bridge<T: Scalar>(p: &StochasticMatrix<T>, len: usize) -> Result<BridgeSpec<T>> {
    let pi = invariant_distribution(p, cast(PERRON_TOL), PERRON_MAX_ITER)?;
    BridgeSpec::new(p.clone(), vec![T::one(); p.dim()], pi, len)
}

/// Rank-one construction `M = x y^T` with `x = q`, `y = 1`: the hidden chain
/// is i.i.d. with law `q` and the measure is stationary and one-dependent.
pub fn one_dependent_spec<T: Scalar>(
    q: &[T],
    kernel: &MarginalKernel<T>,
    n: usize,
) -> Result<MpaSpec<T>> {
    if q.len() != kernel.state_size() {
        return Err(Error::ShapeMismatch);
    }
    if q.iter().any(|x| *x <= T::zero()) {
        return Err(Error::InvalidSpec("q must be strictly positive".into()));
    }
    let states = q.len();
    let alphabet = kernel.alphabet_size();
    let mut matrices = Vec::with_capacity(alphabet);
    for a in 0..alphabet {
        let mut m = Mat::zeros(states, states);
        for b in 0..states {
            for b2 in 0..states {
                m.set(b, b2, q[b] * kernel.prob(b, b2, a as u8));
            }
        }
        matrices.push(m);
    }
    MpaSpec::new(
        alphabet,
        states,
        matrices,
        Boundary::Vectors { x: q.to_vec(), y: vec![T::one(); states] },
        n,
    )
}
