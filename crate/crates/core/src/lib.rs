//! Nonstationary Matern Gaussian field toolkit.
//!
//! The crate covers the full pipeline for nonstationary spatial covariance
//! estimation at desk scale:
//!
//! * [`field`] — spatial locations, observed fields, deterministic RNG
//!   streams, and CSV interchange.
//! * [`special`] — modified Bessel function of the second kind and the
//!   gamma function, the numerical core of the Matern family.
//! * [`covariance`] — stationary and nonstationary Matern kernels, kernel
//!   smoothing of spatially varying parameters, covariance assembly.
//! * [`gp`] — Cholesky factorization with a jitter ladder, exact field
//!   simulation, Gaussian log-likelihood, and AIC.
//! * [`optimize`] — bound-constrained Nelder–Mead simplex search.
//! * [`mle`] — maximum likelihood fitting of anchor parameters.
//! * [`preprocess`] — rasterization of scattered fields onto scaled grids.
//! * [`convnet`] — the stationarity classifier: forward pass, analytic
//!   backpropagation, Adam training, and a binary model format.
//! * [`partition`] — randomized nearest-anchor subregion selection scored
//!   by the classifier, plus fixed axis splits.
//! * [`datagen`] — synthetic corpora for classifier training and the
//!   estimation experiment settings.

pub mod covariance;
pub mod datagen;
pub mod error;
pub mod field;
pub mod gp;
pub mod mle;
pub mod optimize;
pub mod partition;
pub mod preprocess;
pub mod special;

pub mod convnet;

pub use error::{Error, Result};
