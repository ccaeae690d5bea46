//! Distributed linear stochastic approximation over time-varying directed
//! graphs.
//!
//! The crate simulates three iterations — consensus-SA (combine-then-adapt),
//! its adapt-then-combine variant, and push-SA over column-stochastic
//! weights — and computes the analytical objects needed to compare their
//! empirical mean-square error against finite-time bounds: absolute
//! probability sequences of stochastic matrix products, Markov-chain mixing
//! times, Lyapunov solutions, equilibrium points, and the full constant
//! ledger parameterizing the bounds.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature when building without `std`. All linear algebra is dense 64-bit
//! at desk scale (tens of agents, state dimension below ten), and every
//! routine is deterministic: identical inputs and seeds reproduce identical
//! results bit for bit.

#![cfg_attr(not(feature = "std"), no_std)]
// index-based loops dominate this crate's linear algebra; iterator
// rewrites would obscure the math
#![allow(clippy::needless_range_loop)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature for float math");

extern crate alloc;

pub mod analysis;
pub mod engine;
pub mod graph;
pub mod linalg;
pub mod noise;
pub mod rng;
pub mod weights;

mod math;

pub use linalg::Mat;
