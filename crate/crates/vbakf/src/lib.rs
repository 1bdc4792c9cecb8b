//! Variational Bayesian adaptive Kalman filtering for centralized sensor
//! networks whose observations suffer simultaneous packet dropouts and
//! corruption by heavy extra noise.
//!
//! The crate has four layers:
//!
//! - [`numerics`]: a small dense matrix/vector kernel plus the special
//!   functions the conjugate updates need.
//! - [`distributions`]: inverse-Wishart, Beta and Gaussian parameter
//!   containers with the posterior-expectation formulas consumed by the
//!   variational updates.
//! - [`simulator`]: the dual-mask generative model — per-sensor Bernoulli
//!   reception and cleanliness indicators on top of a linear-Gaussian state
//!   space with piecewise-constant noise schedules.
//! - [`filter`]: the adaptive filter itself (per-step variational iteration
//!   with gated sequential fusion) and two Kalman baselines.
//! - [`experiment`]: scripted Monte-Carlo studies with sweeps, metrics and
//!   summary statistics.

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod numerics;
pub mod simulator;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};
