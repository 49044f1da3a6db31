//! The harmonic boundary-driven lattice gas: its invariant measure is a
//! mixture of inhomogeneous geometric products whose hidden parameters are
//! the order statistics of uniforms on `[m_L, m_R]` — equivalently the
//! bridge of a pure-birth exponential-increment chain pinned at the two
//! reservoir densities, for any rate `λ` (the bridge does not depend on it).

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Reservoir parameters `0 < m_L < m_R`, chain length `n`, and the free
/// Doob rate `lambda_rate` of the unpinned hidden chain.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicParams<T> {
    pub m_l: T,
    pub m_r: T,
    pub n: usize,
    pub lambda_rate: T,
}

impl<T: Scalar> HarmonicParams<T> {
    pub fn new(m_l: T, m_r: T, n: usize, lambda_rate: T) -> Result<Self> {
        if !(m_l > T::zero() && m_r > m_l) {
            return Err(Error::DegenerateParams("need 0 < m_L < m_R"));
        }
        if n == 0 {
            return Err(Error::DegenerateParams("need at least one site"));
        }
        if !(lambda_rate > T::zero()) {
            return Err(Error::DegenerateParams("rate must be positive"));
        }
        Ok(HarmonicParams { m_l, m_r, n, lambda_rate })
    }

    fn width(&self) -> T {
        self.m_r - self.m_l
    }
}

/// Geometric pmf of mean `m`: `G_m(k) = (1/(1+m)) (m/(1+m))^k`.
pub fn geometric_pmf<T: Scalar>(m: T, k: usize) -> T {
    let u = m / (T::one() + m);
    (T::one() - u) * u.powi(k as i32)
}

fn sample_geometric<T: Scalar, R: Rng + ?Sized>(m: T, rng: &mut R) -> usize {
    let u = (m / (T::one() + m)).to_f64().unwrap();
    let v: f64 = rng.random::<f64>();
    (v.ln() / u.ln()).floor() as usize
}

/// Sorted i.i.d. uniforms on `[m_L, m_R]` — the hidden parameter profile.
fn ordered_uniforms<T: Scalar, R: Rng + ?Sized>(p: &HarmonicParams<T>, rng: &mut R) -> Vec<T> {
    let mut ms: Vec<T> = (0..p.n)
        .map(|_| p.m_l + p.width() * cast::<T>(rng.random::<f64>()))
        .collect();
    ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ms
}

/// One configuration: ordered uniform means, then independent geometrics.
pub fn harmonic_sample<T: Scalar, R: Rng + ?Sized>(p: &HarmonicParams<T>, rng: &mut R) -> Vec<usize> {
    let ms = ordered_uniforms(p, rng);
    ms.into_iter().map(|m| sample_geometric(m, rng)).collect()
}

/// Hidden bridge `(ζ_0, .., ζ_{N+1})` pinned at the reservoirs, sampled as
/// order statistics of uniforms.
pub fn harmonic_bridge_sample<T: Scalar, R: Rng + ?Sized>(p: &HarmonicParams<T>, rng: &mut R) -> Vec<T> {
    let mut path = Vec::with_capacity(p.n + 2);
    path.push(p.m_l);
    path.extend(ordered_uniforms(p, rng));
    path.push(p.m_r);
    path
}

/// The same bridge sampled through the chain route: `N+1` exponential
/// increments of rate `lambda_rate`, conditioned on their total by
/// Dirichlet rescaling. The rate cancels in the rescaling, which is the
/// λ-independence of the pinned bridge.
pub fn harmonic_bridge_sample_dirichlet<T: Scalar, R: Rng + ?Sized>(
    p: &HarmonicParams<T>,
    rng: &mut R,
) -> Vec<T> {
    let rate = p.lambda_rate.to_f64().unwrap();
    let gaps: Vec<f64> = (0..p.n + 1)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            -u.ln() / rate
        })
        .collect();
    let total: f64 = gaps.iter().sum();
    let mut path = Vec::with_capacity(p.n + 2);
    let mut acc = T::zero();
    path.push(p.m_l);
    for g in &gaps[..p.n] {
        acc = acc + p.width() * cast::<T>(g / total);
        path.push(p.m_l + acc);
    }
    path.push(p.m_r);
    path
}

/// `Σ_{j>k} u^j / j` — the antiderivative of `u^k/(1-u)` with the first
/// `k` powers and the logarithm combined into one convergent tail series
/// (avoids the cancellation of `-ln(1-u) - Σ_{j<=k} u^j/j`).
fn log_tail_series<T: Scalar>(u: T, k: usize) -> T {
    let mut term = u.powi(k as i32 + 1);
    let mut j = k + 1;
    let mut acc = T::zero();
    loop {
        let add = term / cast::<T>(j as f64);
        acc = acc + add;
        if add < acc * cast(1e-17) + cast(1e-300) {
            return acc;
        }
        term = term * u;
        j += 1;
    }
}

/// `∫_lo^hi G_m(k) dm` in closed form via `u = m/(1+m)`.
fn geometric_integral<T: Scalar>(k: usize, lo: T, hi: T) -> T {
    let u_lo = lo / (T::one() + lo);
    let u_hi = hi / (T::one() + hi);
    log_tail_series(u_hi, k) - log_tail_series(u_lo, k)
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson<T: Scalar>(f: &dyn Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn simpson<T: Scalar>(f: &dyn Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T) -> T {
        (b - a) / cast::<T>(6.0) * (fa + cast::<T>(4.0) * fm + fb)
    }
    fn recurse<T: Scalar>(
        f: &dyn Fn(T) -> T,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: usize,
    ) -> T {
        let m = (a + b) / cast::<T>(2.0);
        let lm = (a + m) / cast::<T>(2.0);
        let rm = (m + b) / cast::<T>(2.0);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, m, fa, flm, fm);
        let right = simpson(f, m, b, fm, frm, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= cast::<T>(15.0) * tol {
            return left + right + diff / cast::<T>(15.0);
        }
        let half_tol = tol / cast::<T>(2.0);
        recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
    let m = (a + b) / cast::<T>(2.0);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(f, a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `∫_{lo <= m_1 <= ... <= m_k <= m_R} ∏ G_{m_i}(word_i) dm` with the
/// innermost level in closed form and adaptive quadrature above it.
fn simplex_tail<T: Scalar>(p: &HarmonicParams<T>, word: &[usize], lo: T, tol: T) -> T {
    match word.len() {
        0 => T::one(),
        1 => geometric_integral(word[0], lo, p.m_r),
        _ => {
            let k = word[0];
            let rest = &word[1..];
            let f = move |m: T| geometric_pmf(m, k) * simplex_tail(p, rest, m, tol * cast(0.5));
            adaptive_simpson(&f, lo, p.m_r, tol)
        }
    }
}

/// Exact probability of a configuration by simplex quadrature of the
/// order-statistics mixture, for `n <= 3`.
pub fn harmonic_exact_small<T: Scalar>(p: &HarmonicParams<T>, word: &[usize]) -> Result<T> {
    if word.len() != p.n {
        return Err(Error::LengthMismatch { expected: p.n, got: word.len() });
    }
    if p.n > 3 {
        return Err(Error::TooLarge { size: p.n as u128, limit: 3 });
    }
    let mut factorial = T::one();
    for i in 2..=p.n {
        factorial = factorial * cast::<T>(i as f64);
    }
    let volume = p.width().powi(p.n as i32) / factorial;
    let integral = simplex_tail(p, word, p.m_l, cast(1e-13));
    Ok(integral / volume)
}

/// Closed-form single-site law `(1/(m_R-m_L)) ∫ G_m(k) dm`.
pub fn harmonic_exact_n1<T: Scalar>(p: &HarmonicParams<T>, k: usize) -> T {
    geometric_integral(k, p.m_l, p.m_r) / p.width()
}

/// Occupation cutoff: smallest `k` with the `m_R`-geometric tail below
/// `tail_mass`.
pub fn occupation_cutoff<T: Scalar>(p: &HarmonicParams<T>, tail_mass: T) -> usize {
    let u = (p.m_r / (T::one() + p.m_r)).to_f64().unwrap();
    let t = tail_mass.to_f64().unwrap();
    (t.ln() / u.ln()).ceil().max(1.0) as usize
}
