//! Solver and verification toolkit for a Markovian linear-quadratic
//! liquidation problem with a singular terminal constraint and dark-pool
//! jumps.
//!
//! The value function factors as `V(t, y, x) = v(t, y) x^2`, where the value
//! factor `v` solves a semilinear parabolic PDE that blows up like
//! `eta(y)/(T-t)` at the horizon. This crate
//!
//! - solves that PDE backward with a monotone semi-implicit finite-difference
//!   scheme ([`pdesolver`]),
//! - constructs the analytic envelopes and bounds that sandwich the exact
//!   solution near the horizon ([`envelopes`]),
//! - benchmarks separable models against the scalar backward ODE
//!   ([`odebench`]),
//! - simulates the optimal feedback policy with dark-pool fills
//!   ([`simulator`]),
//! - and verifies `V = v x^2` by Monte Carlo along with suboptimality,
//!   liquidation and martingale checks ([`verify`]).

pub mod cli;
pub mod envelopes;
pub mod hamiltonian;
pub mod model;
pub mod odebench;
pub mod pdesolver;
pub mod simulator;
pub mod verify;

pub use model::{CoefficientValues, ModelParams, ModelSpec, SupNorms};
pub use pdesolver::{build_grid, Grid, LayerMode, ValueSurface};
pub use simulator::{CostEstimate, PathSample, Perturbation, PolicyValue};
pub use verify::{CheckResult, VerifyReport};
