//! Brute-force verification backbone: literal enumeration of MPA measures
//! and mixtures (two independent evaluation routes), distribution metrics,
//! and continuous-time generator stationarity residuals.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::mpa::{MpaSpec, Word};
use crate::scalar::Scalar;

/// Dense probability table over `A^n`, indexed by the big-endian mixed-radix
/// encoding of the word (first letter most significant). The encoding is
/// what the CSV dumps use, so dumps are reproducible.
#[derive(Clone, Debug)]
pub struct ExactDistribution<T> {
    n: usize,
    alphabet: usize,
    table: Vec<T>,
}

/// Big-endian mixed-radix word index.
pub fn encode_word(alphabet: usize, word: &[u8]) -> usize {
    word.iter().fold(0usize, |acc, &a| acc * alphabet + a as usize)
}

/// Inverse of [`encode_word`].
pub fn decode_word(alphabet: usize, n: usize, mut idx: usize) -> Word {
    let mut word = vec![0u8; n];
    for i in (0..n).rev() {
        word[i] = (idx % alphabet) as u8;
        idx /= alphabet;
    }
    word
}

impl<T: Scalar> ExactDistribution<T> {
    /// Normalize a weight table into a distribution.
    pub fn from_weights(n: usize, alphabet: usize, mut table: Vec<T>) -> Result<Self> {
        if table.len() != alphabet.pow(n as u32) {
            return Err(Error::ShapeMismatch);
        }
        if table.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::InvalidSpec("weights must be finite and >= 0".into()));
        }
        let total: T = table.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        for x in table.iter_mut() {
            *x = *x / total;
        }
        Ok(ExactDistribution { n, alphabet, table })
    }

    pub fn from_counts(n: usize, alphabet: usize, counts: &[usize]) -> Result<Self> {
        let weights = counts.iter().map(|&c| T::from(c).unwrap()).collect();
        Self::from_weights(n, alphabet, weights)
    }

    pub fn word_length(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn prob(&self, idx: usize) -> T {
        self.table[idx]
    }

    pub fn prob_word(&self, word: &[u8]) -> T {
        self.table[encode_word(self.alphabet, word)]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.table.iter()
    }

    pub fn words(&self) -> impl Iterator<Item = (usize, Word)> + '_ {
        (0..self.table.len()).map(|idx| (idx, decode_word(self.alphabet, self.n, idx)))
    }

    /// Conditional distribution on the words selected by `keep`.
    pub fn condition(&self, keep: impl Fn(&[u8]) -> bool) -> Result<Self> {
        let mut table = vec![T::zero(); self.table.len()];
        let mut any = false;
        for (idx, word) in self.words() {
            if keep(&word) {
                table[idx] = self.table[idx];
                any = true;
            }
        }
        if !any {
            return Err(Error::EmptySector);
        }
        Self::from_weights(self.n, self.alphabet, table)
    }

    /// Expectation of a word functional.
    pub fn expect(&self, f: impl Fn(&[u8]) -> T) -> T {
        self.words().map(|(idx, w)| self.table[idx] * f(&w)).sum()
    }

    /// CSV dump: `word,probability` with the word as a radix-|A| digit
    /// string and probabilities at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "word,probability")?;
        for (idx, word) in self.words() {
            let digits: String = word.iter().map(|&a| char::from_digit(a as u32, 36).unwrap()).collect();
            writeln!(out, "{digits},{:.16e}", self.table[idx].to_f64().unwrap())?;
        }
        Ok(())
    }
}

/// Guard helper: `base^exp` if it stays within `limit`.
fn checked_size(base: usize, exp: usize, limit: u128) -> Result<usize> {
    let mut size: u128 = 1;
    for _ in 0..exp {
        size = size.saturating_mul(base as u128);
        if size > limit {
            return Err(Error::TooLarge { size, limit });
        }
    }
    Ok(size as usize)
}

/// Literal evaluation of the defining formula over all `|A|^N` words.
pub fn enumerate_measure<T: Scalar>(spec: &MpaSpec<T>, limit: u128) -> Result<ExactDistribution<T>> {
    let n = spec.word_length();
    let alphabet = spec.alphabet_size();
    let size = checked_size(alphabet, n, limit)?;
    let mut table = Vec::with_capacity(size);
    for idx in 0..size {
        let word = decode_word(alphabet, n, idx);
        table.push(spec.unnormalized_weight(&word)?);
    }
    ExactDistribution::from_weights(n, alphabet, table)
}

/// Literal mixture sum `ν(η) = Σ_ζ ρ(ζ) ∏_i p_{ζi,ζi+1}(η_i)` over all
/// hidden paths — deliberately independent of the transfer-matrix route.
pub fn enumerate_mixture<T: Scalar>(mix: &MixtureSpec<T>, limit: u128) -> Result<ExactDistribution<T>> {
    let bridge = mix.bridge();
    let dim = bridge.dim();
    let len = bridge.len();
    let n = mix.word_length();
    let alphabet = mix.kernel().alphabet_size();
    let paths = checked_size(dim, len, limit)?;
    let size = checked_size(alphabet, n, limit)?;

    // Unnormalized path weights g * prod P * f, normalized by their sum.
    let p = bridge.transition().mat();
    let mut path_weights = Vec::with_capacity(paths);
    let mut total = T::zero();
    for idx in 0..paths {
        let mut path = vec![0usize; len];
        let mut v = idx;
        for i in (0..len).rev() {
            path[i] = v % dim;
            v /= dim;
        }
        let mut w = bridge.start_weight()[path[0]] * bridge.end_weight()[path[len - 1]];
        for pair in path.windows(2) {
            w = w * *p.get(pair[0], pair[1]);
        }
        total = total + w;
        path_weights.push((path, w));
    }
    if total <= T::zero() {
        return Err(Error::DegenerateNormalization);
    }

    fn expand<T: Scalar>(
        mix: &MixtureSpec<T>,
        path: &[usize],
        table: &mut [T],
        depth: usize,
        idx: usize,
        weight: T,
    ) {
        let n = mix.word_length();
        let alphabet = mix.kernel().alphabet_size();
        if depth == n {
            table[idx] = table[idx] + weight;
            return;
        }
        for a in 0..alphabet {
            let w = weight * mix.kernel().prob(path[depth], path[depth + 1], a as u8);
            if w > T::zero() {
                expand(mix, path, table, depth + 1, idx * alphabet + a, w);
            }
        }
    }

    let mut table = vec![T::zero(); size];
    for (path, w) in &path_weights {
        if *w == T::zero() {
            continue;
        }
        expand(mix, path, &mut table, 0, 0, *w / total);
    }
    ExactDistribution::from_weights(n, alphabet, table)
}

fn check_same_shape<T: Scalar>(d1: &ExactDistribution<T>, d2: &ExactDistribution<T>) -> Result<()> {
    if d1.n != d2.n || d1.alphabet != d2.alphabet {
        return Err(Error::ShapeMismatch);
    }
    Ok(())
}

/// Total variation distance `(1/2) Σ |d1 - d2|`.
pub fn total_variation<T: Scalar>(d1: &ExactDistribution<T>, d2: &ExactDistribution<T>) -> Result<T> {
    check_same_shape(d1, d2)?;
    let two = T::one() + T::one();
    Ok(d1
        .table
        .iter()
        .zip(&d2.table)
        .map(|(a, b)| (*a - *b).abs())
        .sum::<T>()
        / two)
}

/// `max |d1 - d2|` entrywise.
pub fn max_abs_diff<T: Scalar>(d1: &ExactDistribution<T>, d2: &ExactDistribution<T>) -> Result<T> {
    check_same_shape(d1, d2)?;
    Ok(d1
        .table
        .iter()
        .zip(&d2.table)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max))
}

/// Markov generator on `|A|^N` configurations, stored as sparse off-diagonal
/// rate rows plus the diagonal. Rows must sum to zero within 1e-12 — this is
/// asserted at construction, so adding a nonzero constant to the diagonal is
/// rejected rather than silently changing residuals.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix<T> {
    n_states: usize,
    rows: Vec<Vec<(usize, T)>>,
    diag: Vec<T>,
}

impl<T: Scalar> GeneratorMatrix<T> {
    pub fn from_parts(rows: Vec<Vec<(usize, T)>>, diag: Vec<T>) -> Result<Self> {
        let n_states = rows.len();
        if diag.len() != n_states {
            return Err(Error::ShapeMismatch);
        }
        let tol = crate::scalar::cast::<T>(1e-12);
        for (i, row) in rows.iter().enumerate() {
            let mut sum = diag[i];
            for &(j, r) in row {
                if j >= n_states || j == i {
                    return Err(Error::InvalidSpec("off-diagonal entries only".into()));
                }
                if !r.is_finite() || r < T::zero() {
                    return Err(Error::InvalidSpec("rates must be finite and >= 0".into()));
                }
                sum = sum + r;
            }
            if sum.abs() > tol {
                return Err(Error::InvalidSpec(format!("generator row {i} does not sum to zero")));
            }
        }
        Ok(GeneratorMatrix { n_states, rows, diag })
    }

    /// Build from off-diagonal rates, deriving the diagonal.
    pub fn from_rates(rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let diag = rows
            .iter()
            .map(|row| -row.iter().map(|&(_, r)| r).sum::<T>())
            .collect();
        Self::from_parts(rows, diag)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn rate(&self, i: usize, j: usize) -> T {
        if i == j {
            return self.diag[i];
        }
        self.rows[i]
            .iter()
            .find_map(|&(k, r)| (k == j).then_some(r))
            .unwrap_or_else(T::zero)
    }

    pub fn off_diagonal(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }
}

/// `‖μ^T L‖_∞` with the distribution as a row vector — zero iff μ is
/// stationary for the generator.
pub fn stationarity_residual<T: Scalar>(d: &ExactDistribution<T>, l: &GeneratorMatrix<T>) -> Result<T> {
    if d.len() != l.n_states() {
        return Err(Error::ShapeMismatch);
    }
    let mut out = vec![T::zero(); l.n_states()];
    for i in 0..l.n_states() {
        let mu = d.prob(i);
        out[i] = out[i] + mu * l.diag[i];
        if mu == T::zero() {
            continue;
        }
        for &(j, r) in &l.rows[i] {
            out[j] = out[j] + mu * r;
        }
    }
    Ok(out.iter().fold(T::zero(), |a, x| a.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::mixture::{decompose_default, MarginalKernel, MixtureSpec};
    use crate::mpa::Boundary;
    use crate::bridge::BridgeSpec;
    use crate::spectral::StochasticMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn word_codec_roundtrip() {
        for idx in 0..27usize {
            let w = decode_word(3, 3, idx);
            assert_eq!(encode_word(3, &w), idx);
        }
        assert_eq!(decode_word(3, 3, 5), vec![0, 1, 2]);
    }

    #[test]
    fn scalar_spec_enumerates_to_product_table() {
        let matrices: Vec<Mat<f64>> = vec![
            Mat::from_rows(vec![vec![0.3]]).unwrap(),
            Mat::from_rows(vec![vec![0.7]]).unwrap(),
        ];
        let spec = MpaSpec::new(2, 1, matrices, Boundary::Vectors { x: vec![1.0], y: vec![1.0] }, 2).unwrap();
        let dist = enumerate_measure(&spec, 1 << 20).unwrap();
        assert!((dist.prob_word(&[0, 1]) - 0.21).abs() < 1e-15);
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        // N=1 spec enumerates to the single-site marginal.
        let spec1 = spec.with_word_length(1).unwrap();
        let d1 = enumerate_measure(&spec1, 1 << 20).unwrap();
        assert!((d1.prob_word(&[1]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn guard_rejects_oversized_enumerations() {
        let matrices: Vec<Mat<f64>> = vec![
            Mat::from_rows(vec![vec![0.3]]).unwrap(),
            Mat::from_rows(vec![vec![0.7]]).unwrap(),
        ];
        let spec = MpaSpec::new(2, 1, matrices, Boundary::Vectors { x: vec![1.0], y: vec![1.0] }, 30).unwrap();
        assert!(matches!(
            enumerate_measure(&spec, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn mixture_enumeration_matches_converse_spec_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for _ in 0..5 {
            let states = 2 + (rng.random::<u32>() % 2) as usize;
            let rows: Vec<Vec<f64>> = (0..states)
                .map(|_| {
                    let mut r: Vec<f64> = (0..states).map(|_| 0.1 + rng.random::<f64>()).collect();
                    let s: f64 = r.iter().sum();
                    r.iter_mut().for_each(|x| *x /= s);
                    r
                })
                .collect();
            let p = StochasticMatrix::from_rows(rows).unwrap();
            let mut probs = Vec::new();
            for _ in 0..states * states {
                let u = 0.05 + 0.9 * rng.random::<f64>();
                probs.extend_from_slice(&[u, 1.0 - u]);
            }
            let kernel = MarginalKernel::new(states, 2, probs, vec![true; states * states]).unwrap();
            let f: Vec<f64> = (0..states).map(|_| 0.1 + rng.random::<f64>()).collect();
            let g: Vec<f64> = (0..states).map(|_| 0.1 + rng.random::<f64>()).collect();
            let bridge = BridgeSpec::new(p, f, g, 4).unwrap();
            let mix = MixtureSpec::new(bridge, kernel, 1.0).unwrap();
            let by_sum = enumerate_mixture(&mix, 1 << 22).unwrap();
            let back = crate::mpa::MpaSpec::from_mixture(&mix).unwrap();
            let by_spec = enumerate_measure(&back, 1 << 22).unwrap();
            assert!(max_abs_diff(&by_sum, &by_spec).unwrap() < 1e-10);
        }
    }

    #[test]
    fn delta_kernel_mixture_enumerates_to_path_pushforward() {
        // Two states, kernel sends (b,b') to letter 1(b'=1): the word is the
        // path tail, so the word law is the pushforward of the bridge law.
        let p = StochasticMatrix::from_rows(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let probs: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let kernel = MarginalKernel::new(2, 2, probs, vec![true; 4]).unwrap();
        let bridge = BridgeSpec::new(p.clone(), vec![1.0; 2], vec![0.5, 0.5], 3).unwrap();
        let mix = MixtureSpec::new(bridge.clone(), kernel, 1.0).unwrap();
        let dist = enumerate_mixture(&mix, 1 << 20).unwrap();
        for idx in 0..4usize {
            let word = decode_word(2, 2, idx);
            let mut expect = 0.0;
            for first in 0..2usize {
                let path = vec![first, word[0] as usize, word[1] as usize];
                expect += bridge.path_probability(&path).unwrap();
            }
            assert!((dist.prob(idx) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn metrics_trivial_and_random_cases() {
        let d1 = ExactDistribution::<f64>::from_weights(1, 2, vec![1.0, 0.0]).unwrap();
        let d2 = ExactDistribution::from_weights(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&d1, &d1).unwrap(), 0.0);
        assert_eq!(max_abs_diff(&d1, &d1).unwrap(), 0.0);
        assert_eq!(total_variation(&d1, &d2).unwrap(), 1.0);

        let a = ExactDistribution::<f64>::from_weights(1, 3, vec![0.5, 0.3, 0.2]).unwrap();
        let b = ExactDistribution::from_weights(1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        let tv = total_variation(&a, &b).unwrap();
        assert!((tv - 0.5 * (0.3 + 0.2 + 0.1)).abs() < 1e-15);
        assert!((max_abs_diff(&a, &b).unwrap() - 0.3).abs() < 1e-15);

        let c = ExactDistribution::from_weights(2, 2, vec![0.25; 4]).unwrap();
        assert!(matches!(total_variation(&a, &c), Err(Error::ShapeMismatch)));
    }

    #[test]
    fn stationarity_residual_trivial_generators() {
        // Uniform measure on a symmetric exchange generator.
        let rows: Vec<Vec<(usize, f64)>> = vec![
            vec![(1usize, 1.0)],
            vec![(0usize, 1.0)],
        ];
        let l = GeneratorMatrix::from_rates(rows).unwrap();
        let uniform = ExactDistribution::from_weights(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(stationarity_residual(&uniform, &l).unwrap() < 1e-15);

        // Single-site birth-death with alpha = beta: Bernoulli(1/2) is
        // stationary by detailed balance.
        let alpha = 0.37;
        let l = GeneratorMatrix::from_rates(vec![
            vec![(1usize, alpha)],
            vec![(0usize, alpha)],
        ])
        .unwrap();
        let half = ExactDistribution::from_weights(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(stationarity_residual(&half, &l).unwrap() < 1e-15);
    }

    #[test]
    fn generator_rejects_shifted_diagonal() {
        let rows: Vec<Vec<(usize, f64)>> = vec![vec![(1usize, 1.0)], vec![(0usize, 1.0)]];
        let ok = GeneratorMatrix::from_parts(rows.clone(), vec![-1.0, -1.0]);
        assert!(ok.is_ok());
        let shifted = GeneratorMatrix::from_parts(rows, vec![-1.0 + 0.5, -1.0 + 0.5]);
        assert!(shifted.is_err());
    }

    #[test]
    fn enumerate_from_mixture_agrees_with_enumerate_mixture() {
        let mut rng = ChaCha12Rng::seed_from_u64(9000);
        let matrices: Vec<Mat<f64>> = (0..2)
            .map(|_| {
                Mat::from_rows(
                    (0..3)
                        .map(|_| (0..3).map(|_| 0.05 + rng.random::<f64>()).collect())
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let spec = crate::mpa::MpaSpec::new(
            2,
            3,
            matrices,
            Boundary::Vectors { x: vec![0.5, 0.2, 0.9], y: vec![0.1, 0.8, 0.5] },
            3,
        )
        .unwrap();
        let mix = decompose_default(&spec).unwrap();
        let a = enumerate_mixture(&mix, 1 << 22).unwrap();
        let b = enumerate_measure(&crate::mpa::MpaSpec::from_mixture(&mix).unwrap(), 1 << 22).unwrap();
        assert!(max_abs_diff(&a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn csv_dump_is_stable() {
        let d = ExactDistribution::<f64>::from_weights(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "word,probability");
        assert!(lines.next().unwrap().starts_with("00,"));
        assert!(text.lines().count() == 5);
    }
}
