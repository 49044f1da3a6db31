//! Matrix product measures: `μ_N(η) = y^T (∏_i M^{η_i}) x / Z_N`, in both
//! boundary-vector and trace (periodic) form, with exact cylinder
//! probabilities and partition functions.

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::mixture::MixtureSpec;
use crate::scalar::Scalar;
use crate::spectral::is_irreducible;

/// A word over the alphabet `0..|A|-1`.
pub type Word = Vec<u8>;

/// Boundary contraction of the matrix product.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary<T> {
    /// `y^T (∏ M^{η_i}) x`
    Vectors { x: Vec<T>, y: Vec<T> },
    /// `Tr[∏ M^{η_i}]` (periodic form)
    Trace,
}

/// A matrix product measure specification over words of length `n`.
#[derive(Clone, Debug)]
pub struct MpaSpec<T> {
    alphabet: usize,
    states: usize,
    matrices: Vec<Mat<T>>,
    boundary: Boundary<T>,
    n: usize,
    /// Cached `M = Σ_a M^a`.
    m_total: Mat<T>,
}

/// Scaled row-vector propagation: tracks `v` with `max|v| ~ 1` and the
/// accumulated natural log of the factored-out scale. Keeps contractions
/// finite for word lengths far beyond what linear arithmetic survives.
struct ScaledVec<T> {
    v: Vec<T>,
    ln_scale: T,
    zero: bool,
}

impl<T: Scalar> ScaledVec<T> {
    fn new(v: Vec<T>) -> Self {
        let mut s = ScaledVec { v, ln_scale: T::zero(), zero: false };
        s.rescale();
        s
    }

    fn rescale(&mut self) {
        let mx = self.v.iter().fold(T::zero(), |a, x| a.max(x.abs()));
        if mx == T::zero() {
            self.zero = true;
            return;
        }
        for x in self.v.iter_mut() {
            *x = *x / mx;
        }
        self.ln_scale = self.ln_scale + mx.ln();
    }

    fn mul_mat(&mut self, m: &Mat<T>) {
        if self.zero {
            return;
        }
        self.v = m.vecmat(&self.v);
        self.rescale();
    }

    /// `ln(v · w)`, or `None` when the contraction is zero.
    fn ln_dot(&self, w: &[T]) -> Option<T> {
        if self.zero {
            return None;
        }
        let d = dot(&self.v, w);
        if d <= T::zero() {
            None
        } else {
            Some(d.ln() + self.ln_scale)
        }
    }
}

/// Scaled matrix-product propagation for the trace form.
struct ScaledMat<T> {
    m: Mat<T>,
    ln_scale: T,
    zero: bool,
}

impl<T: Scalar> ScaledMat<T> {
    fn identity(n: usize) -> Self {
        ScaledMat { m: Mat::identity(n), ln_scale: T::zero(), zero: false }
    }

    fn mul(&mut self, other: &Mat<T>) {
        if self.zero {
            return;
        }
        self.m = self.m.matmul(other);
        let mx = self.m.iter().fold(T::zero(), |a, x| a.max(x.abs()));
        if mx == T::zero() {
            self.zero = true;
            return;
        }
        self.m = self.m.map(|x| *x / mx);
        self.ln_scale = self.ln_scale + mx.ln();
    }

    fn ln_trace(&self) -> Option<T> {
        if self.zero {
            return None;
        }
        let t = self.m.trace();
        if t <= T::zero() {
            None
        } else {
            Some(t.ln() + self.ln_scale)
        }
    }
}

impl<T: Scalar> MpaSpec<T> {
    pub fn new(
        alphabet: usize,
        states: usize,
        matrices: Vec<Mat<T>>,
        boundary: Boundary<T>,
        n: usize,
    ) -> Result<Self> {
        if alphabet == 0 || states == 0 || n == 0 {
            return Err(Error::InvalidSpec("alphabet, states and N must be positive".into()));
        }
        if matrices.len() != alphabet {
            return Err(Error::InvalidSpec("need one matrix per letter".into()));
        }
        for m in &matrices {
            if m.rows() != states || m.cols() != states {
                return Err(Error::ShapeMismatch);
            }
            if m.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::InvalidSpec("matrix entries must be finite and >= 0".into()));
            }
        }
        if let Boundary::Vectors { x, y } = &boundary {
            if x.len() != states || y.len() != states {
                return Err(Error::ShapeMismatch);
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::InvalidSpec("boundary vectors must be finite and >= 0".into()));
            }
        }
        let mut m_total = Mat::zeros(states, states);
        for m in &matrices {
            for i in 0..states {
                for j in 0..states {
                    m_total.set(i, j, *m_total.get(i, j) + *m.get(i, j));
                }
            }
        }
        if !is_irreducible(&m_total) {
            return Err(Error::NotIrreducible);
        }
        let spec = MpaSpec { alphabet, states, matrices, boundary, n, m_total };
        // Z_N must be strictly positive (y^T M^N x > 0, resp. Tr[M^N] > 0).
        spec.log_partition_function()?;
        Ok(spec)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn state_size(&self) -> usize {
        self.states
    }

    pub fn word_length(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> &Boundary<T> {
        &self.boundary
    }

    pub fn matrix(&self, a: u8) -> &Mat<T> {
        &self.matrices[a as usize]
    }

    pub fn matrices(&self) -> &[Mat<T>] {
        &self.matrices
    }

    /// `M = Σ_a M^a`.
    pub fn m_total(&self) -> &Mat<T> {
        &self.m_total
    }

    /// Same spec with a different word length.
    pub fn with_word_length(&self, n: usize) -> Result<Self> {
        Self::new(self.alphabet, self.states, self.matrices.clone(), self.boundary.clone(), n)
    }

    fn check_word(&self, word: &[u8]) -> Result<()> {
        if word.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: word.len() });
        }
        if word.iter().any(|&a| (a as usize) >= self.alphabet) {
            return Err(Error::InvalidSpec("letter outside alphabet".into()));
        }
        Ok(())
    }

    fn ln_contract<'a>(&self, letters: impl Iterator<Item = &'a Mat<T>>) -> Option<T>
    where
        T: 'a,
    {
        match &self.boundary {
            Boundary::Vectors { x, y } => {
                let mut v = ScaledVec::new(y.clone());
                for m in letters {
                    v.mul_mat(m);
                }
                v.ln_dot(x)
            }
            Boundary::Trace => {
                let mut p = ScaledMat::identity(self.states);
                for m in letters {
                    p.mul(m);
                }
                p.ln_trace()
            }
        }
    }

    /// The matrix-product contraction `y^T (∏ M^{η_i}) x` (or its trace
    /// analog), computed left to right with vector-matrix products.
    pub fn unnormalized_weight(&self, word: &[u8]) -> Result<T> {
        self.check_word(word)?;
        match &self.boundary {
            Boundary::Vectors { x, y } => {
                let mut v = y.clone();
                for &a in word {
                    v = self.matrices[a as usize].vecmat(&v);
                }
                Ok(dot(&v, x))
            }
            Boundary::Trace => {
                let mut p = Mat::identity(self.states);
                for &a in word {
                    p = p.matmul(&self.matrices[a as usize]);
                }
                Ok(p.trace())
            }
        }
    }

    /// `ln` of the unnormalized weight with per-step rescaling; `None` for
    /// words of weight zero.
    pub fn log_unnormalized_weight(&self, word: &[u8]) -> Result<Option<T>> {
        self.check_word(word)?;
        Ok(self.ln_contract(word.iter().map(|&a| &self.matrices[a as usize])))
    }

    /// `Z_N = y^T M^N x` (resp. `Tr[M^N]`) via repeated vector-matrix
    /// products; the matrix power is never formed.
    pub fn partition_function(&self) -> Result<T> {
        let z = match &self.boundary {
            Boundary::Vectors { x, y } => {
                let mut v = y.clone();
                for _ in 0..self.n {
                    v = self.m_total.vecmat(&v);
                }
                dot(&v, x)
            }
            Boundary::Trace => {
                let mut p = Mat::identity(self.states);
                for _ in 0..self.n {
                    p = p.matmul(&self.m_total);
                }
                p.trace()
            }
        };
        if !z.is_finite() || z <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        Ok(z)
    }

    /// `ln Z_N`, finite for any valid spec.
    pub fn log_partition_function(&self) -> Result<T> {
        self.ln_contract(std::iter::repeat(&self.m_total).take(self.n))
            .ok_or(Error::DegenerateNormalization)
    }

    /// `μ_N(η)`. Evaluates in the linear domain and falls back to the
    /// log-domain path when the linear pass over- or underflows.
    pub fn probability(&self, word: &[u8]) -> Result<T> {
        self.check_word(word)?;
        let linear = || -> Option<T> {
            let w = self.unnormalized_weight(word).ok()?;
            let z = self.partition_function().ok()?;
            let p = w / z;
            p.is_finite().then_some(p)
        };
        if let Some(p) = linear() {
            return Ok(p);
        }
        let lz = self.log_partition_function()?;
        match self.log_unnormalized_weight(word)? {
            None => Ok(T::zero()),
            Some(lw) => Ok((lw - lz).exp()),
        }
    }

    /// Probability of the cylinder set fixing `η_i..η_j` (1-based, inclusive)
    /// to `subword`: `y^T M^{i-1} (∏_{k=i}^{j} M^{subword}) M^{N-j} x / Z_N`,
    /// with the trace analog closing the ring by `M` powers.
    pub fn cylinder_probability(&self, i: usize, j: usize, subword: &[u8]) -> Result<T> {
        if i < 1 || j < i || j > self.n {
            return Err(Error::IndexOutOfRange);
        }
        if subword.len() != j - i + 1 {
            return Err(Error::LengthMismatch { expected: j - i + 1, got: subword.len() });
        }
        if subword.iter().any(|&a| (a as usize) >= self.alphabet) {
            return Err(Error::InvalidSpec("letter outside alphabet".into()));
        }
        let seq: Vec<&Mat<T>> = std::iter::repeat(&self.m_total)
            .take(i - 1)
            .chain(subword.iter().map(|&a| &self.matrices[a as usize]))
            .chain(std::iter::repeat(&self.m_total).take(self.n - j))
            .collect();
        let lz = self.log_partition_function()?;
        match self.ln_contract(seq.into_iter()) {
            None => Ok(T::zero()),
            Some(lw) => Ok((lw - lz).exp()),
        }
    }

    /// MPA form of a mixture (the converse direction of the equivalence):
    /// `x = f`, `y = g`, `M^a_{b,b'} = P_{b,b'} p_{b,b'}(a)`; the resulting
    /// `M = Σ_a M^a` coincides with `P`.
    pub fn from_mixture(mix: &MixtureSpec<T>) -> Result<Self> {
        let states = mix.bridge().dim();
        let alphabet = mix.kernel().alphabet_size();
        let p = mix.bridge().transition().mat();
        let mut matrices = Vec::with_capacity(alphabet);
        for a in 0..alphabet {
            let mut m = Mat::zeros(states, states);
            for b in 0..states {
                for b2 in 0..states {
                    m.set(b, b2, *p.get(b, b2) * mix.kernel().prob(b, b2, a as u8));
                }
            }
            matrices.push(m);
        }
        MpaSpec::new(
            alphabet,
            states,
            matrices,
            Boundary::Vectors { x: mix.bridge().end_weight().to_vec(), y: mix.bridge().start_weight().to_vec() },
            mix.word_length(),
        )
    }
}

pub(crate) fn letters_valid(alphabet: usize, word: &[u8]) -> bool {
    word.iter().all(|&a| (a as usize) < alphabet)
}
