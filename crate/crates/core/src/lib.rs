//! Exact MUSIC and randomized fast-MUSIC angle-of-arrival estimation for
//! massive uniform-linear-array FMCW radar.
//!
//! The crate is organised bottom-up:
//!
//! - [`cxmat`]: dense complex kernels (Hermitian eigendecomposition, thin SVD,
//!   QR, pseudo-inverse) and seeded random sketching matrices.
//! - [`scene`]: FMCW beat-signal synthesis for a ULA and sample covariances.
//! - [`estimators`]: exact signal subspace, the two randomized estimators
//!   (column-sampling Nyström and iterated Gaussian projection) and the
//!   comparison baselines (block Lanczos, matrix inverse, propagator, FFT).
//! - [`spectrum`]: pseudo-spectrum evaluation, normalization, peak picking and
//!   error metrics.
//! - [`bounds`]: the pseudo-spectrum approximation bounds, empirical bound
//!   verification and statistical checks of the supporting sketching lemmas.

// `!(x > 0.0)` rejects NaN along with non-positive values; keep that form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cxmat;
pub mod error;
pub mod estimators;
pub mod scene;
pub mod spectrum;

pub use error::{Error, Result};
