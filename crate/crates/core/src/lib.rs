//! Location-scale noise models (LSNMs) `Y = f(X) + g(X)·N`.
//!
//! The crate fits heteroscedastic Gaussian regressions in the natural
//! parametrization `η₁ = μ/σ²`, `η₂ = −1/(2σ²)` and uses the fitted models
//! to decide the causal direction between two observed variables.
//!
//! Layout:
//!
//! | module | contents |
//! |--------|----------|
//! | [`model`] | natural/mean-variance conversions, point log-likelihood and derivatives |
//! | [`features`] | B-spline feature maps, design matrices, standardization |
//! | [`concave`] | jointly concave feature-map estimator (WLS + bound-constrained quasi-Newton) |
//! | [`mlp`] | one-hidden-layer network estimator trained with Adam |
//! | [`ifgls`] | iterative feasible generalized least squares baseline |
//! | [`independence`] | HSIC statistic, gamma and permutation p-values, standardized residuals |
//! | [`inference`] | likelihood and independence based direction decisions |
//! | [`bench`] | generators, corpus ingestion, AUDRC / KL metrics, benchmark runner |

pub mod bench;
pub mod concave;
pub mod data;
pub mod error;
pub mod features;
pub mod fit;
pub mod ifgls;
pub mod independence;
pub mod inference;
mod lbfgsb;
mod linalg;
pub mod mlp;
pub mod model;
mod seed;

pub use data::SamplePair;
pub use error::{Error, Result};
pub use fit::{FittedLSNM, Predictor};
pub use model::{LogLikReport, MeanVarParams, NaturalParams};
