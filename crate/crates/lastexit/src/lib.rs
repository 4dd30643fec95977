//! Conditioning a transient Markov process on its location at a large
//! exponential time.
//!
//! The library computes, exactly where possible and statistically otherwise,
//! the objects that arise when a transient process is conditioned to sit at a
//! fixed state `a` at an independent `Exp(lambda)` time and the rate is sent
//! to zero: Doob h-transforms of one-dimensional diffusions, the resurrected
//! ("bang-bang") process and its resolvent, the conditioned generator with its
//! interface conditions at `a`, and an exactly solvable birth-death chain
//! laboratory.
//!
//! Modules:
//!
//! * [`diffusion_core`] — scale/speed/killing characteristics of regular 1-D
//!   diffusions, hitting probabilities, Green functions, boundary
//!   classification, and the Green kernel `r_0` for processes attracted to the
//!   lower endpoint.
//! * [`closed_form_models`] — Brownian motion with drift, the transient
//!   Ornstein-Uhlenbeck process, and the logistic SDE in closed form.
//! * [`htransform`] — excessive functions, representing measures, and the
//!   transformed characteristics `(s^h, m^h, k^h)`.
//! * [`bangbang`] — the resolvent algebra of the resurrected process.
//! * [`ctmc_lab`] — the asymmetric continuous-time walk with exact matrix
//!   oracles for every formula.
//! * [`mc_engine`] — reproducible parallel Monte Carlo with local-time
//!   estimation, killing clocks, and last-exit detection.
//! * [`fd_generator`] — finite-difference discretization of the conditioned
//!   generator.
//! * [`cli_experiments`] — the experiment registry behind the `lastexit`
//!   binary.

// Guards of the form `!(x > 0.0)` are used deliberately so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bangbang;
pub mod cli_experiments;
pub mod closed_form_models;
pub mod ctmc_lab;
pub mod diffusion_core;
mod error;
pub mod fd_generator;
pub mod htransform;
pub mod linalg;
pub mod mc_engine;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
