//! Competitive density-dependent population processes.
//!
//! This crate holds the algorithmic core: model definitions, exact jump-chain
//! simulation, the fluid-limit flow and its variational equation, the
//! geometry of the quasi-neutral slow manifold `Ω = {R = 0}` (projection `π`,
//! time change `τ`, eigenvalue `λ` and their derivatives), and the limiting
//! diffusion on `Ω`.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled; transcendental functions then come from `libm`. IO, file
//! formats, parallel experiment drivers and the command line live in the
//! companion `qnpop` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod diffusion;
pub mod error;
pub mod fluid;
pub mod linalg;
pub mod manifold;
pub mod math;
pub mod model;
pub mod ode;
pub mod process;
pub mod rng;
pub mod stats;
pub mod zoo;

pub use error::{Error, Result};
pub use model::{ClutchRate, DeathRate, ModelSpec, QuasiNeutral};
