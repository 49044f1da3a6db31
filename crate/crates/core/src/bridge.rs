//! Markov bridges: the law `ρ_{N+1}(ζ) = g_{ζ1} (∏ P_{ζi,ζi+1}) f_{ζN+1} / (g^T P^N f)`
//! on paths of length N+1, realized exactly through backward functions and
//! forward sampling (no MCMC).

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::scalar::{cast, Scalar};
use crate::spectral::StochasticMatrix;

/// A hidden path in `B^{len}`.
pub type Path = Vec<usize>;

/// Bridge specification: stochastic matrix plus nonnegative end weights.
/// `len` is the number of ζ variables (N+1 for words of length N).
#[derive(Clone, Debug)]
pub struct BridgeSpec<T> {
    p: StochasticMatrix<T>,
    f: Vec<T>,
    g: Vec<T>,
    len: usize,
}

/// Backward functions `h_k = P^{N+1-k} f`, `k = 1..N+1`, stored with
/// per-level scale exponents so tables survive long bridges.
#[derive(Clone, Debug)]
pub struct BackwardTable<T> {
    /// `levels[k]` is `h_{k+1}` (0-based), rescaled to max 1.
    levels: Vec<Vec<T>>,
    /// `h_true = levels[k] * exp(ln_scale[k])`.
    ln_scale: Vec<T>,
}

impl<T: Scalar> BackwardTable<T> {
    /// Scaled value of `h_k(b)` with `k` 1-based.
    pub fn value(&self, k: usize, b: usize) -> T {
        self.levels[k - 1][b] * self.ln_scale[k - 1].exp()
    }

    pub fn level(&self, k: usize) -> &[T] {
        &self.levels[k - 1]
    }

    pub fn ln_level_scale(&self, k: usize) -> T {
        self.ln_scale[k - 1]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Forward weights `F_k = g^T P^{k-1}`, `k = 1..N+1`, same storage scheme.
#[derive(Clone, Debug)]
pub struct ForwardTable<T> {
    levels: Vec<Vec<T>>,
    ln_scale: Vec<T>,
}

impl<T: Scalar> ForwardTable<T> {
    pub fn level(&self, k: usize) -> &[T] {
        &self.levels[k - 1]
    }

    pub fn ln_level_scale(&self, k: usize) -> T {
        self.ln_scale[k - 1]
    }
}

fn rescaled<T: Scalar>(mut v: Vec<T>, ln_in: T) -> (Vec<T>, T) {
    let mx = v.iter().fold(T::zero(), |a, x| a.max(*x));
    if mx == T::zero() {
        return (v, ln_in);
    }
    for x in v.iter_mut() {
        *x = *x / mx;
    }
    (v, ln_in + mx.ln())
}

impl<T: Scalar> BridgeSpec<T> {
    pub fn new(p: StochasticMatrix<T>, f: Vec<T>, g: Vec<T>, len: usize) -> Result<Self> {
        let dim = p.dim();
        if f.len() != dim || g.len() != dim {
            return Err(Error::ShapeMismatch);
        }
        if len == 0 {
            return Err(Error::InvalidSpec("bridge length must be at least 1".into()));
        }
        let nonneg = |v: &[T]| v.iter().all(|x| x.is_finite() && *x >= T::zero());
        if !nonneg(&f) || !nonneg(&g) || f.iter().all(|x| *x == T::zero()) || g.iter().all(|x| *x == T::zero()) {
            return Err(Error::InvalidSpec("end weights must be nonnegative and nonzero".into()));
        }
        let spec = BridgeSpec { p, f, g, len };
        // g^T P^N f must be strictly positive.
        spec.backward_table()?;
        Ok(spec)
    }

    /// Pinned bridge: start at `b`, end at `b2`.
    pub fn pinned(p: StochasticMatrix<T>, b: usize, b2: usize, len: usize) -> Result<Self> {
        let dim = p.dim();
        let mut f = vec![T::zero(); dim];
        let mut g = vec![T::zero(); dim];
        f[b2] = T::one();
        g[b] = T::one();
        Self::new(p, f, g, len)
    }

    pub fn transition(&self) -> &StochasticMatrix<T> {
        &self.p
    }

    pub fn end_weight(&self) -> &[T] {
        &self.f
    }

    pub fn start_weight(&self) -> &[T] {
        &self.g
    }

    /// Number of ζ variables.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// Number of transitions (N for a bridge of N+1 variables).
    pub fn steps(&self) -> usize {
        self.len - 1
    }

    /// Backward recursion `h_{N+1} = f`, `h_k = P h_{k+1}`.
    pub fn backward_table(&self) -> Result<BackwardTable<T>> {
        let mut levels = vec![Vec::new(); self.len];
        let mut ln_scale = vec![T::zero(); self.len];
        let (v, s) = rescaled(self.f.clone(), T::zero());
        levels[self.len - 1] = v;
        ln_scale[self.len - 1] = s;
        for k in (0..self.len - 1).rev() {
            let next = self.p.mat().matvec(&levels[k + 1]);
            let (v, s) = rescaled(next, ln_scale[k + 1]);
            levels[k] = v;
            ln_scale[k] = s;
        }
        let table = BackwardTable { levels, ln_scale };
        let norm = dot(&self.g, table.level(1));
        if norm <= T::zero() || !norm.is_finite() {
            return Err(Error::DegenerateNormalization);
        }
        Ok(table)
    }

    /// Forward recursion `F_1 = g`, `F_{k+1} = F_k P`.
    pub fn forward_table(&self) -> ForwardTable<T> {
        let mut levels = Vec::with_capacity(self.len);
        let mut ln_scale = Vec::with_capacity(self.len);
        let (v, s) = rescaled(self.g.clone(), T::zero());
        levels.push(v);
        ln_scale.push(s);
        for k in 1..self.len {
            let next = self.p.mat().vecmat(&levels[k - 1]);
            let (v, s) = rescaled(next, ln_scale[k - 1]);
            levels.push(v);
            ln_scale.push(s);
        }
        ForwardTable { levels, ln_scale }
    }

    /// `ln(g^T P^N f)`.
    pub fn log_normalizer(&self, table: &BackwardTable<T>) -> T {
        dot(&self.g, table.level(1)).ln() + table.ln_level_scale(1)
    }

    /// Exact path probability under the bridge law.
    pub fn path_probability(&self, path: &[usize]) -> Result<T> {
        if path.len() != self.len {
            return Err(Error::LengthMismatch { expected: self.len, got: path.len() });
        }
        if path.iter().any(|&b| b >= self.dim()) {
            return Err(Error::IndexOutOfRange);
        }
        let table = self.backward_table()?;
        let mut ln_num = T::zero();
        let mut factors = vec![self.g[path[0]], self.f[path[self.len - 1]]];
        for w in path.windows(2) {
            factors.push(*self.p.mat().get(w[0], w[1]));
        }
        for fac in factors {
            if fac == T::zero() {
                return Ok(T::zero());
            }
            ln_num = ln_num + fac.ln();
        }
        Ok((ln_num - self.log_normalizer(&table)).exp())
    }

    /// Transition law at step `k` (1-based, `1 <= k <= N`) from state `b`:
    /// `q(b') = P_{b,b'} h_{k+1}(b') / h_k(b)`.
    pub fn transition_kernel(&self, table: &BackwardTable<T>, k: usize, b: usize) -> Result<Vec<T>> {
        if k < 1 || k > self.steps() {
            return Err(Error::IndexOutOfRange);
        }
        if b >= self.dim() {
            return Err(Error::IndexOutOfRange);
        }
        let hk = table.level(k)[b];
        if hk <= T::zero() {
            return Err(Error::UnreachableState { step: k, state: b });
        }
        let scale = (table.ln_level_scale(k + 1) - table.ln_level_scale(k)).exp();
        let next = table.level(k + 1);
        let mut q: Vec<T> = self
            .p
            .row(b)
            .iter()
            .zip(next)
            .map(|(p, h)| *p * *h * scale / hk)
            .collect();
        let sum: T = q.iter().copied().sum();
        for x in q.iter_mut() {
            *x = *x / sum;
        }
        Ok(q)
    }

    /// Initial law `ζ_1 ~ g_b h_1(b) / (g·h_1)`.
    pub fn initial_law(&self, table: &BackwardTable<T>) -> Vec<T> {
        let mut w: Vec<T> = self.g.iter().zip(table.level(1)).map(|(g, h)| *g * *h).collect();
        let sum: T = w.iter().copied().sum();
        for x in w.iter_mut() {
            *x = *x / sum;
        }
        w
    }

    /// Draw one exact sample of the bridge.
    pub fn sample_path<R: Rng + ?Sized>(&self, table: &BackwardTable<T>, rng: &mut R) -> Path {
        let mut path = Vec::with_capacity(self.len);
        let init = self.initial_law(table);
        path.push(sample_categorical(&init, rng));
        for k in 1..self.len {
            let b = *path.last().unwrap();
            let q = self
                .transition_kernel(table, k, b)
                .expect("sampled state is reachable by construction");
            path.push(sample_categorical(&q, rng));
        }
        path
    }

    /// Joint law of the endpoints `(ζ_1, ζ_{N+1})`:
    /// `m(b,b') = g_b (P^N)_{b,b'} f_{b'} / (g^T P^N f)`.
    pub fn endpoint_law(&self) -> Result<Mat<T>> {
        self.two_point_law_inner(1, self.len)
    }

    /// Joint law of `(ζ_i, ζ_j)`, `1 <= i < j <= N+1`.
    pub fn two_point_marginal(&self, i: usize, j: usize) -> Result<Mat<T>> {
        if i < 1 || j <= i || j > self.len {
            return Err(Error::IndexOutOfRange);
        }
        self.two_point_law_inner(i, j)
    }

    fn two_point_law_inner(&self, i: usize, j: usize) -> Result<Mat<T>> {
        let dim = self.dim();
        let forward = self.forward_table();
        let table = self.backward_table()?;
        let alpha = forward.level(i);
        let h = table.level(j);
        let steps = j - i;
        let mut joint = Mat::zeros(dim, dim);
        for b in 0..dim {
            if alpha[b] == T::zero() {
                continue;
            }
            // Row b of P^{j-i} by propagating the unit row vector.
            let mut row = vec![T::zero(); dim];
            row[b] = T::one();
            for _ in 0..steps {
                row = self.p.mat().vecmat(&row);
            }
            for b2 in 0..dim {
                joint.set(b, b2, alpha[b] * row[b2] * h[b2]);
            }
        }
        let total: T = joint.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        Ok(joint.map(|x| *x / total))
    }
}

/// Inverse-CDF draw from a normalized weight vector.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let u: T = cast(rng.random::<f64>());
    let mut acc = T::zero();
    for (i, w) in weights.iter().enumerate() {
        acc = acc + *w;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver of mass; return the last positive-weight index.
    weights
        .iter()
        .rposition(|w| *w > T::zero())
        .expect("categorical weights must not be all zero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::StochasticMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn p3() -> StochasticMatrix<f64> {
        StochasticMatrix::from_rows(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.1, 0.5],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn zero_step_bridge_has_h1_equal_f() {
        let f = vec![0.2, 0.3, 0.5];
        let spec = BridgeSpec::new(p3(), f.clone(), vec![1.0, 1.0, 1.0], 1).unwrap();
        let table = spec.backward_table().unwrap();
        for b in 0..3 {
            assert!((table.value(1, b) - f[b]).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_end_weight_gives_harmonic_table() {
        let spec = BridgeSpec::new(p3(), vec![1.0; 3], vec![0.3, 0.3, 0.4], 5).unwrap();
        let table = spec.backward_table().unwrap();
        for k in 1..=5 {
            for b in 0..3 {
                assert!((table.value(k, b) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn path_probabilities_sum_to_one() {
        let spec = BridgeSpec::new(p3(), vec![0.1, 1.0, 0.4], vec![0.7, 0.1, 0.9], 5).unwrap();
        let mut total = 0.0;
        for idx in 0..3usize.pow(5) {
            let mut path = Vec::new();
            let mut v = idx;
            for _ in 0..5 {
                path.push(v % 3);
                v /= 3;
            }
            total += spec.path_probability(&path).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinned_bridge_matches_closed_form() {
        let p = p3();
        let spec = BridgeSpec::pinned(p.clone(), 0, 2, 4).unwrap();
        // rho(z) = prod P / (P^3)_{0,2} on admissible paths, else zero.
        let mut p3m = p.mat().clone();
        p3m = p3m.matmul(p.mat()).matmul(p.mat());
        let denom = *p3m.get(0, 2);
        let path = [0usize, 1, 1, 2];
        let expect = p.mat().get(0, 1) * p.mat().get(1, 1) * p.mat().get(1, 2) / denom;
        assert!((spec.path_probability(&path).unwrap() - expect).abs() < 1e-14);
        assert_eq!(spec.path_probability(&[1, 1, 1, 2]).unwrap(), 0.0);
        assert_eq!(spec.path_probability(&[0, 1, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn kernel_with_flat_end_weight_is_the_chain_itself() {
        let p = p3();
        let spec = BridgeSpec::new(p.clone(), vec![1.0; 3], vec![0.2, 0.3, 0.5], 4).unwrap();
        let table = spec.backward_table().unwrap();
        for k in 1..=3 {
            for b in 0..3 {
                let q = spec.transition_kernel(&table, k, b).unwrap();
                for b2 in 0..3 {
                    assert!((q[b2] - p.mat().get(b, b2)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn forced_last_step_is_proportional_to_p_times_f() {
        let p = p3();
        let mut f = vec![0.0; 3];
        f[2] = 1.0;
        let spec = BridgeSpec::new(p.clone(), f, vec![1.0; 3], 3).unwrap();
        let table = spec.backward_table().unwrap();
        let q = spec.transition_kernel(&table, 2, 1).unwrap();
        assert!((q[2] - 1.0).abs() < 1e-14);
        assert!(q[0] == 0.0 && q[1] == 0.0);
    }

    #[test]
    fn markov_property_matches_conditional_path_probabilities() {
        // rho(z_{k+1} | z_1..z_k) computed from path probabilities equals the
        // backward-function kernel, exhaustively at N=3 (len 4), |B|=3.
        let spec = BridgeSpec::new(p3(), vec![0.3, 0.2, 0.9], vec![0.5, 0.8, 0.1], 4).unwrap();
        let table = spec.backward_table().unwrap();
        let all_paths = |len: usize| -> Vec<Vec<usize>> {
            (0..3usize.pow(len as u32))
                .map(|mut v| {
                    (0..len)
                        .map(|_| {
                            let d = v % 3;
                            v /= 3;
                            d
                        })
                        .collect()
                })
                .collect()
        };
        for prefix_len in 1..4usize {
            for prefix in all_paths(prefix_len) {
                // P(prefix) as a cylinder: sum over completions.
                let mass = |pre: &[usize]| -> f64 {
                    all_paths(4 - pre.len())
                        .into_iter()
                        .map(|suffix| {
                            let mut full = pre.to_vec();
                            full.extend(suffix);
                            spec.path_probability(&full).unwrap()
                        })
                        .sum()
                };
                let denom = mass(&prefix);
                if denom == 0.0 {
                    continue;
                }
                let b = *prefix.last().unwrap();
                let q = spec.transition_kernel(&table, prefix_len, b).unwrap();
                for b2 in 0..3 {
                    let mut ext = prefix.clone();
                    ext.push(b2);
                    let cond = mass(&ext) / denom;
                    assert!((cond - q[b2]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn backward_normalizer_is_g_pn_f() {
        let p = p3();
        let f = vec![0.1, 0.7, 0.2];
        let g = vec![0.6, 0.3, 0.1];
        let spec = BridgeSpec::new(p.clone(), f.clone(), g.clone(), 6).unwrap();
        let table = spec.backward_table().unwrap();
        let mut v = f;
        for _ in 0..5 {
            v = p.mat().matvec(&v);
        }
        let direct = dot(&g, &v);
        let norm = spec.log_normalizer(&table).exp();
        assert!((norm - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn deterministic_chain_always_returns_unique_path() {
        // Path graph with one positive transition per row and delta ends.
        let p = StochasticMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let spec = BridgeSpec::pinned(p, 0, 2, 3).unwrap();
        let table = spec.backward_table().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(spec.sample_path(&table, &mut rng), vec![0, 1, 2]);
        }
    }

    #[test]
    fn endpoint_law_delta_ends_is_a_point_mass() {
        let spec = BridgeSpec::pinned(p3(), 1, 2, 4).unwrap();
        let m = spec.endpoint_law().unwrap();
        assert!((m.get(1, 2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_marginal_with_flat_f_is_normalized_g() {
        let g = vec![0.6, 0.3, 0.1];
        let spec = BridgeSpec::new(p3(), vec![1.0; 3], g.clone(), 4).unwrap();
        let m = spec.endpoint_law().unwrap();
        let gsum: f64 = g.iter().sum();
        for b in 0..3 {
            let marg: f64 = (0..3).map(|b2| *m.get(b, b2)).sum();
            assert!((marg - g[b] / gsum).abs() < 1e-13);
        }
    }

    #[test]
    fn endpoint_law_decomposes_the_bridge() {
        // rho = sum_{b,b'} m(b,b') rho^{b,b'} at N=3 within 1e-12.
        let spec = BridgeSpec::new(p3(), vec![0.2, 0.9, 0.4], vec![0.5, 0.1, 0.7], 4).unwrap();
        let m = spec.endpoint_law().unwrap();
        let total: f64 = m.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        for idx in 0..81usize {
            let mut path = Vec::new();
            let mut v = idx;
            for _ in 0..4 {
                path.push(v % 3);
                v /= 3;
            }
            let direct = spec.path_probability(&path).unwrap();
            let mut mixed = 0.0;
            for b in 0..3 {
                for b2 in 0..3 {
                    if *m.get(b, b2) == 0.0 {
                        continue;
                    }
                    let pinned = BridgeSpec::pinned(spec.transition().clone(), b, b2, 4).unwrap();
                    mixed += m.get(b, b2) * pinned.path_probability(&path).unwrap();
                }
            }
            assert!((direct - mixed).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_marginal_consistency() {
        let spec = BridgeSpec::new(p3(), vec![0.2, 0.9, 0.4], vec![0.5, 0.1, 0.7], 5).unwrap();
        // Endpoints agree with endpoint_law.
        let a = spec.two_point_marginal(1, 5).unwrap();
        let b = spec.endpoint_law().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-13);
            }
        }
        // Against exhaustive enumeration at (i,j) = (2,4).
        let joint = spec.two_point_marginal(2, 4).unwrap();
        let mut direct: Mat<f64> = Mat::zeros(3, 3);
        for idx in 0..3usize.pow(5) {
            let mut path = Vec::new();
            let mut v = idx;
            for _ in 0..5 {
                path.push(v % 3);
                v /= 3;
            }
            let p = spec.path_probability(&path).unwrap();
            direct.set(path[1], path[3], *direct.get(path[1], path[3]) + p);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((joint.get(i, j) - direct.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjacent_two_point_with_flat_weights_is_start_law_times_p() {
        // Doubly stochastic P with f = g = 1: uniform start, joint = pi P.
        let p = StochasticMatrix::<f64>::from_rows(vec![
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let spec = BridgeSpec::new(p.clone(), vec![1.0; 3], vec![1.0; 3], 4).unwrap();
        let joint = spec.two_point_marginal(1, 2).unwrap();
        for b in 0..3 {
            for b2 in 0..3 {
                assert!((joint.get(b, b2) - p.mat().get(b, b2) / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sampler_matches_exact_law_in_total_variation() {
        let p = StochasticMatrix::from_rows(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let spec = BridgeSpec::new(p, vec![0.3, 1.0], vec![1.0, 0.5], 4).unwrap();
        let table = spec.backward_table().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let samples = 100_000;
        let mut counts = vec![0usize; 16];
        for _ in 0..samples {
            let path = spec.sample_path(&table, &mut rng);
            let idx = path.iter().fold(0usize, |acc, &b| acc * 2 + b);
            counts[idx] += 1;
        }
        let mut tv = 0.0;
        for idx in 0..16usize {
            let path: Vec<usize> = (0..4).rev().map(|k| (idx >> k) & 1).collect();
            let exact = spec.path_probability(&path).unwrap();
            tv += (exact - counts[idx] as f64 / samples as f64).abs();
        }
        tv /= 2.0;
        assert!(tv < 0.02, "tv = {tv}");
    }
}
