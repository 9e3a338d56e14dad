//! Core library for certified stochastic MPC experiments.
//!
//! The crate is organized around a small set of numeric subsystems:
//!
//! - [`qpcore`]: a dense operator-splitting QP/LP solver with an exact
//!   KKT polish step. Everything else that optimizes goes through it.
//! - [`setalg`]: polytope arithmetic in halfspace form (Minkowski sums,
//!   affine images, support functions) and invariant-set computations
//!   (outer mRPI approximation, maximal RPI sets).
//! - [`lti`]: Schur tests, discrete Riccati and Lyapunov equations.
//! - [`dist`]: bounded zero-mean disturbance models with reproducible
//!   counter-based sample streams.
//! - [`convergence`]: comparison-function machinery and the horizon /
//!   tail-bound calculus used to certify almost-sure convergence of a
//!   disturbed closed loop to a robust positively invariant set.
//! - [`controller`]: the strategy interface shared by all control laws,
//!   plus the trivial fixed-gain and zero strategies.
//! - [`smpc_affine`]: receding-horizon controller with an affine-in-the-
//!   disturbance policy, expected quadratic cost and robust constraints.
//! - [`smpc_striped`]: receding-horizon controller with striped
//!   disturbance feedback, offline gains and tightened constraint
//!   sequences for hard and probabilistic constraints.

pub mod controller;
pub mod convergence;
pub mod dist;
pub mod lti;
pub mod qpcore;
pub mod setalg;
pub mod smpc_affine;
pub mod smpc_striped;

pub use nalgebra;
