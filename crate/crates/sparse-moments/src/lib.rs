//! Recovery of k-spike mixtures (discrete distributions) from noisy low-order
//! moments in 1, 2, and d dimensions, using a robust variant of Prony's
//! method: ridge-regularized characteristic polynomial, companion-matrix
//! roots, projection + jitter, Vandermonde weight regression, and a final
//! transport-optimal repair of negative weights.
//!
//! The crate also ships moment oracles for topic models (K-snapshot
//! documents) and Gaussian location mixtures (Hermite estimators), plus
//! transportation-distance evaluators used to verify recovery quality.
//!
//! Entry points:
//! - [`prony1d::recover_1d`]: k spikes on `[0,1]` from `M_0..M_{2k-1}`.
//! - [`prony2d::recover_2d`]: k spikes on the unit triangle from mixed
//!   moments, via the complex correspondence `beta = x + iy`.
//! - [`highdim::recover_highdim`]: k spikes on the simplex (or ball) from a
//!   projected-moment oracle, using one random 1-D projection and d planar
//!   projections.
//! - [`mixtures::transport_1d`] / [`mixtures::transport_general`]: exact
//!   Wasserstein-1 evaluators.

pub mod calibration;
pub mod error;
pub mod highdim;
pub mod linalg;
pub mod mixtures;
pub mod moments;
pub mod oracles;
pub mod prony1d;
pub mod prony2d;
pub mod refine;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
