//! Matrix product measures and their canonical probabilistic form.
//!
//! A measure on words `η ∈ A^N` is of matrix-product type when it can be
//! written as `μ_N(η) = y^T (∏_i M^{η_i}) x / Z_N` for nonnegative matrices
//! `M^a` and boundary vectors (or a trace closing the product). This crate
//! represents such measures, computes their equivalent form as a mixture of
//! inhomogeneous product measures driven by a Markov bridge — via the
//! Perron eigenpair of `M = Σ_a M^a` and the generalized Doob transform —
//! and verifies the equivalence with brute-force enumeration oracles.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64`); the
//! `*64` aliases below are the lane used by the CLI and the test suites.
//! `models` holds concrete particle-system measures (open TASEP, the
//! two-class ring TASEP with its queue representation, and the harmonic
//! model) together with their generators for stationarity checks.

pub mod bridge;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod models;
pub mod mpa;
pub mod oracle;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

pub type Mat64 = linalg::Mat<f64>;
pub type NonNegMatrix64 = spectral::NonNegMatrix<f64>;
pub type StochasticMatrix64 = spectral::StochasticMatrix<f64>;
pub type PerronPair64 = spectral::PerronPair<f64>;
pub type MpaSpec64 = mpa::MpaSpec<f64>;
pub type BridgeSpec64 = bridge::BridgeSpec<f64>;
pub type BackwardTable64 = bridge::BackwardTable<f64>;
pub type MarginalKernel64 = mixture::MarginalKernel<f64>;
pub type MixtureSpec64 = mixture::MixtureSpec<f64>;
pub type CanonicalForm64 = mixture::CanonicalForm<f64>;
pub type ExactDistribution64 = oracle::ExactDistribution<f64>;
pub type GeneratorMatrix64 = oracle::GeneratorMatrix<f64>;
