//! Finite nonnegative matrices: irreducibility, Perron eigenpair by power
//! iteration, and the generalized Doob transform `P = λ⁻¹ E⁻¹ M E` that
//! turns a nonnegative matrix with Perron pair (λ, e) into a stochastic one.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{cast, Scalar};

/// Default residual tolerance for the power iteration.
pub const PERRON_TOL: f64 = 1e-12;
/// Default iteration cap for the power iteration.
pub const PERRON_MAX_ITER: usize = 1_000_000;
/// Rows of a stochastic matrix must sum to one within this bound.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Square matrix with nonnegative finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegMatrix<T> {
    mat: Mat<T>,
}

impl<T: Scalar> NonNegMatrix<T> {
    pub fn new(mat: Mat<T>) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::InvalidSpec("matrix must be square and nonempty".into()));
        }
        if mat.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::InvalidSpec("entries must be finite and >= 0".into()));
        }
        Ok(NonNegMatrix { mat })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat<T> {
        &self.mat
    }
}

/// Perron eigenvalue and right eigenvector, normalized to sum one.
#[derive(Clone, Debug)]
pub struct PerronPair<T> {
    pub lambda: T,
    pub evec: Vec<T>,
    /// `‖Me − λe‖_∞ / λ` at the returned pair.
    pub residual: T,
}

/// Row-stochastic matrix: entries in [0,1], rows summing to one within 1e-12.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix<T> {
    mat: Mat<T>,
}

impl<T: Scalar> StochasticMatrix<T> {
    pub fn new(mat: Mat<T>) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::InvalidSpec("matrix must be square and nonempty".into()));
        }
        let tol = cast::<T>(1e-12);
        for i in 0..mat.rows() {
            let mut sum = T::zero();
            for x in mat.row(i) {
                if !x.is_finite() || *x < T::zero() || *x > T::one() + tol {
                    return Err(Error::InvalidSpec("entries must lie in [0,1]".into()));
                }
                sum = sum + *x;
            }
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidSpec(format!(
                    "row {i} sums to {sum} instead of 1"
                )));
            }
        }
        Ok(StochasticMatrix { mat })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat<T> {
        &self.mat
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.mat.row(i)
    }
}

/// True iff the directed graph with an edge b -> b' whenever `M_{b,b'} > 0`
/// is strongly connected. Two reachability passes: forward from node 0 and
/// backward from node 0.
pub fn is_irreducible<T: Scalar>(m: &Mat<T>) -> bool {
    assert!(m.is_square());
    let n = m.rows();
    if n == 0 {
        return false;
    }
    let reach = |transpose: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(b) = stack.pop() {
            for b2 in 0..n {
                let w = if transpose { m.get(b2, b) } else { m.get(b, b2) };
                if *w > T::zero() && !seen[b2] {
                    seen[b2] = true;
                    stack.push(b2);
                }
            }
        }
        seen
    };
    reach(false).iter().all(|&s| s) && reach(true).iter().all(|&s| s)
}

/// `‖Me − λe‖_∞ / λ` restricted to the given rows.
///
/// Model truncations of infinite matrices satisfy their closed-form
/// eigenrelation only away from the truncation boundary, so callers can
/// exclude boundary rows here.
pub fn eigen_residual_on_rows<T: Scalar>(m: &Mat<T>, lambda: T, e: &[T], rows: &[usize]) -> T {
    let me = m.matvec(e);
    let mut worst = T::zero();
    for &b in rows {
        let d = (me[b] - lambda * e[b]).abs();
        if d > worst {
            worst = d;
        }
    }
    worst / lambda
}

/// `‖Me − λe‖_∞ / λ` over all rows.
pub fn eigen_residual<T: Scalar>(m: &Mat<T>, lambda: T, e: &[T]) -> T {
    let rows: Vec<usize> = (0..m.rows()).collect();
    eigen_residual_on_rows(m, lambda, e, &rows)
}

fn power_iterate<T: Scalar>(
    m: &NonNegMatrix<T>,
    tol: T,
    max_iter: usize,
    mut trace: Option<&mut Vec<T>>,
) -> Result<PerronPair<T>> {
    if !is_irreducible(m.mat()) {
        return Err(Error::NotIrreducible);
    }
    let n = m.dim();
    let uniform = T::one() / cast::<T>(n as f64);
    let mut v = vec![uniform; n];
    for iter in 0..max_iter {
        // One step of M + I, renormalized to sum 1.
        let mut w = m.mat().matvec(&v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = *wi + *vi;
        }
        let sum: T = w.iter().copied().sum();
        if !sum.is_finite() || sum <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        for wi in w.iter_mut() {
            *wi = *wi / sum;
        }
        v = w;

        let me = m.mat().matvec(&v);
        // Rayleigh-style estimate with left weight 1: sum(Mv) when sum(v)=1.
        let lambda: T = me.iter().copied().sum();
        if lambda <= T::zero() {
            return Err(Error::DegenerateNormalization);
        }
        let mut worst_abs = T::zero();
        let mut worst_rel = T::zero();
        for (mei, vi) in me.iter().zip(&v) {
            let d = (*mei - lambda * *vi).abs();
            if d > worst_abs {
                worst_abs = d;
            }
            let r = d / (lambda * *vi);
            if r > worst_rel {
                worst_rel = r;
            }
        }
        let residual = worst_abs / lambda;
        if let Some(t) = trace.as_deref_mut() {
            t.push(residual);
        }
        if residual <= tol && worst_rel <= tol {
            if v.iter().any(|x| *x <= T::zero()) {
                // Cannot happen for irreducible M after n iterations of M+I;
                // keep iterating until positivity is reached.
                if iter + 1 >= n {
                    return Err(Error::NoConvergence(max_iter));
                }
                continue;
            }
            return Ok(PerronPair { lambda, evec: v, residual });
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Perron eigenpair of an irreducible nonnegative matrix by power iteration.
///
/// Iterates on the unit-shifted matrix `M + I`, which is primitive whenever
/// `M` is irreducible, so convergence does not depend on the period of `M`.
/// The shift leaves eigenvectors unchanged and is subtracted from the
/// reported eigenvalue. Stops once `‖Me − λe‖_∞ ≤ tol·λ` and additionally
/// the per-row relative deviation `max_b |(Me)_b − λe_b| / (λe_b)` is below
/// `tol`, which is what keeps the Doob row sums tight.
pub fn perron<T: Scalar>(m: &NonNegMatrix<T>, tol: T, max_iter: usize) -> Result<PerronPair<T>> {
    power_iterate(m, tol, max_iter, None)
}

/// Residual `‖Me − λe‖_∞ / λ` after each of the first `iters` power steps.
pub fn perron_residual_trace<T: Scalar>(m: &NonNegMatrix<T>, iters: usize) -> Result<Vec<T>> {
    let mut trace = Vec::with_capacity(iters);
    match power_iterate(m, -T::one(), iters, Some(&mut trace)) {
        Err(Error::NoConvergence(_)) | Ok(_) => Ok(trace),
        Err(e) => Err(e),
    }
}

pub fn perron_default<T: Scalar>(m: &NonNegMatrix<T>) -> Result<PerronPair<T>> {
    perron(m, cast(PERRON_TOL), PERRON_MAX_ITER)
}

fn doob_from_pair<T: Scalar>(m: &Mat<T>, lambda: T, e: &[T]) -> Result<StochasticMatrix<T>> {
    let n = m.rows();
    let row_tol = cast::<T>(ROW_SUM_TOL);
    let mut out = Mat::zeros(n, n);
    let mut worst = T::zero();
    for b in 0..n {
        let mut sum = T::zero();
        for b2 in 0..n {
            let p = *m.get(b, b2) * e[b2] / (lambda * e[b]);
            out.set(b, b2, p);
            sum = sum + p;
        }
        let dev = (sum - T::one()).abs();
        if dev > worst {
            worst = dev;
        }
        if dev > row_tol {
            return Err(Error::NotAnEigenpair(dev.to_f64().unwrap_or(f64::NAN)));
        }
        // Renormalize so each row sums to exactly one.
        for b2 in 0..n {
            let p = *out.get(b, b2) / sum;
            out.set(b, b2, p);
        }
    }
    StochasticMatrix::new(out)
}

/// Generalized Doob transform `P_{b,b'} = M_{b,b'} e_{b'} / (λ e_b)`.
///
/// Rows are renormalized to sum exactly one; a row deviating from one by
/// more than 1e-9 before renormalization means the supplied pair is not an
/// eigenpair and is an error.
pub fn doob_transform<T: Scalar>(m: &NonNegMatrix<T>, pair: &PerronPair<T>) -> Result<StochasticMatrix<T>> {
    doob_from_pair(m.mat(), pair.lambda, &pair.evec)
}

/// Doob transform from an analytically known eigenpair.
///
/// Validates `‖Me − λe‖_∞ ≤ 1e-9 λ` before applying the same formula as
/// [`doob_transform`]. Model builders that truncate infinite matrices are
/// expected to close the truncation so the eigenrelation holds on every
/// row (see the model constructors).
pub fn exact_doob_from_closed_form<T: Scalar>(
    m: &NonNegMatrix<T>,
    lambda: T,
    e: &[T],
) -> Result<StochasticMatrix<T>> {
    if e.len() != m.dim() {
        return Err(Error::ShapeMismatch);
    }
    if e.iter().any(|x| *x <= T::zero()) || lambda <= T::zero() {
        return Err(Error::InvalidSpec("eigenpair must be strictly positive".into()));
    }
    let res = eigen_residual(m.mat(), lambda, e);
    if res > cast(ROW_SUM_TOL) {
        return Err(Error::NotAnEigenpair(res.to_f64().unwrap_or(f64::NAN)));
    }
    doob_from_pair(m.mat(), lambda, e)
}

/// Invariant distribution of an irreducible stochastic matrix, by power
/// iteration on the transpose. Returns π with `πP = π` and `Σπ = 1`.
pub fn invariant_distribution<T: Scalar>(p: &StochasticMatrix<T>, tol: T, max_iter: usize) -> Result<Vec<T>> {
    if !is_irreducible(p.mat()) {
        return Err(Error::NotIrreducible);
    }
    let n = p.dim();
    let mut v = vec![T::one() / cast::<T>(n as f64); n];
    for _ in 0..max_iter {
        // One step of (P^T + I)v, i.e. v <- vP + v, renormalized.
        let mut w = p.mat().vecmat(&v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = *wi + *vi;
        }
        let sum: T = w.iter().copied().sum();
        for wi in w.iter_mut() {
            *wi = *wi / sum;
        }
        v = w;
        let pv = p.mat().vecmat(&v);
        let mut worst = T::zero();
        for (a, b) in pv.iter().zip(&v) {
            let d = (*a - *b).abs();
            if d > worst {
                worst = d;
            }
        }
        if worst <= tol && v.iter().all(|x| *x > T::zero()) {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence(max_iter))
}
