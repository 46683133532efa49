//! Bayesian treatment of inverse problems of the form `u = A_m g + noise`,
//! where the forcing `g` enters linearly and a low-dimensional parameter `m`
//! (a geometry, a kernel shape) enters nonlinearly.
//!
//! The noise scale is integrated out analytically, leaving a posterior over
//! `(m, alpha)` alone, with `alpha` the regularization weight. Evaluating that
//! posterior needs only an n x n factorization (n = number of measurements),
//! which keeps the cost independent of the forcing resolution `p`. On top of
//! the density the crate provides two samplers (an adaptive random-walk chain
//! and a multi-proposal variant that evaluates whole batches of candidates
//! concurrently), classical selection rules (GCV, marginal likelihood,
//! constrained least squares) driven by a multistart simplex search, and a
//! synthetic fault-slip benchmark problem.
//!
//! ```
//! use geoinv::linalg::{ForwardOperator, RegularizerGram, misfit_quadratic};
//! use ndarray::array;
//!
//! let op = ForwardOperator::from_dense(array![[1.0]]).unwrap();
//! let gram = RegularizerGram::identity(1);
//! // For A = [1], R = I: u' B^{-1} u = u^2 alpha / (1 + alpha).
//! let q = misfit_quadratic(&op, &gram, 1.0, &array![2.0].view()).unwrap();
//! assert!((q - 2.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod fault;
pub mod linalg;
pub mod posterior;
pub mod rng;
pub mod sampler;
pub mod selector;

pub use error::{Error, Result};
