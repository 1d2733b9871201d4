//! Simulation and numerical verification toolkit for one-dimensional diffusion
//! across a point interface where the diffusivity jumps from `D-` (left of the
//! origin) to `D+` (right of the origin).
//!
//! The process is built from an excursion-sign-flipped Brownian motion with
//! skew parameter `alpha` and the piecewise-linear space map
//! `sigma(x) = sqrt(D+) x` for `x >= 0`, `sqrt(D-) x` for `x <= 0`. A one-real-
//! parameter family of interface conditions, indexed by `lambda in (0, 1)`
//! through `alpha(lambda) = lambda sqrt(D-) / (lambda sqrt(D-) + (1 - lambda)
//! sqrt(D+))`, connects the stochastic model to the parabolic interface problem
//! `dc/dt = (D(x)/2) c_xx` with `lambda c_x(0+) = (1 - lambda) c_x(0-)`.
//!
//! Module map:
//! - [`model`]: medium description, skew parameter algebra, space map.
//! - [`rng`], [`path`], [`sampler`], [`batch`]: counter-based deterministic
//!   path generation (lattice walks, excursion flips, exact transitions) and
//!   the data-parallel batch driver.
//! - [`local_time`]: one-sided window estimators for mathematical and natural
//!   local time, occupation-measure plumbing.
//! - [`occupation`]: signed occupation statistics and the residence threshold.
//! - [`passage`]: first-passage sampling, survival curves, breakthrough
//!   comparisons, lattice hitting-probability oracle.
//! - [`pde`], [`testfn`]: Crank-Nicolson interface solver, Feynman-Kac
//!   estimates, martingale drift tests, and the derivative-matching function
//!   class they share.
//! - [`stats`]: estimates with standard errors, KS and chi-square tests.

pub mod batch;
pub mod error;
pub mod local_time;
pub mod model;
pub mod occupation;
pub mod passage;
pub mod path;
pub mod pde;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod testfn;
mod tridiag;

pub use error::{Result, SimError};
pub use model::{InterfaceModel, MediumSpec, SkewParam};
