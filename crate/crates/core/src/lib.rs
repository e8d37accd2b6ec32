//! Numerical toolkit for the fourth-order Schrödinger operator H = Δ² + V on ℝ².
//!
//! The crate provides, at desk scale:
//!
//! * cylinder functions (J₀, Y₀, H₀±, K₀) in series and asymptotic regimes ([`specfun`]),
//! * the free resolvent kernel of Δ², its low-energy expansion and scaled profiles ([`kernels`]),
//! * quadrature-weighted matrix discretizations of the Birman–Schwinger family
//!   M±(λ) = U + vR₀±(λ⁴)v ([`discretize`]),
//! * projection-based inversion utilities ([`schur`]),
//! * the zero-energy threshold classification chain S₀ ⊇ … ⊇ S₅ with resonance-function
//!   reconstruction ([`resonance`]),
//! * dyadic oscillatory-integral machinery ([`oscint`]),
//! * spectral propagation of e^{−itH} and decay-rate fits ([`propagate`]).
//!
//! Pure scalar mathematics (special functions, kernels, smooth windows) is generic over
//! the floating type through [`scalar::Real`]; dense linear algebra is `f64`/[`C64`]
//! throughout since it is backed by LAPACK.

// Force linkage of the system BLAS/LAPACK used by the `lapack` bindings.
extern crate openblas_src;

pub mod dd;
pub mod discretize;
pub mod kernels;
pub mod linalg;
pub mod oscint;
pub mod propagate;
pub mod resonance;
pub mod scalar;
pub mod schur;
pub mod specfun;

/// Default real scalar for all discretized linear algebra.
pub type R64 = f64;
/// Default complex scalar for all discretized linear algebra.
pub type C64 = num_complex::Complex<f64>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("accuracy target missed: {0} (achieved {1:.3e})")]
    Accuracy(String, f64),
    #[error("inconsistency: {0}")]
    Inconsistency(String),
    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;
