//! Toolkit for a Markov-modulated stochastic dissemination model: a
//! population of agents holding integer "wealth" units, fed by external
//! Poisson arrivals and reshuffled at Poisson shock epochs by per-agent
//! redistribution kernels, with every rate modulated by an autonomous
//! background Markov chain.
//!
//! The crate provides four independent evaluation routes for the same model,
//! which cross-check one another:
//!
//! * [`sim`] — exact stochastic simulation by competing exponential clocks;
//! * [`moments`] — linear ODE systems for first and second moments, plus
//!   stationary solutions and the spectral-abscissa stability check;
//! * [`oracle`] — the exact master equation on a truncated state space, for
//!   tiny instances;
//! * [`apps`] — worked scenarios (wealth leader/followers, two-group opinion
//!   dynamics, file storage) with their closed forms and normal
//!   approximations.

// Index loops dominate the dense matrix assembly code on purpose; iterator
// rewrites obscure the (agent, state) index arithmetic.
#![allow(clippy::needless_range_loop)]

pub mod apps;
pub mod kernels;
pub mod model;
pub mod moments;
pub mod numerics;
pub mod oracle;
pub mod sim;

pub use kernels::{offspring_convolution, LatticeDistribution, OffspringDistribution};
pub use model::{
    validate, ArrivalClass, BackgroundChain, InitialState, ModelSpec, ShockStream, ValidationReport,
};
