//! Causal binomial approximation of stochastic processes.
//!
//! Any path observed on a fine grid can be followed, in real time and using
//! only its past values, by a process whose increments at coarse sampling
//! points take exactly two values. This crate builds those approximations
//! and measures how good they are:
//!
//! * [`grid`] / [`process`] — time grids, sampled paths, and seeded
//!   generators (Wiener, Euler–Maruyama, deterministic fixtures);
//! * [`preprocess`] — clipping and causal trailing-window mollification,
//!   which make a path trackable at a fixed slope;
//! * [`tracker`] — the fixed-slope trackers (continuous piecewise affine
//!   and right-continuous step) with their exact `2Mδ` / `4Mδ` sup bounds;
//! * [`ode`] — approximation of a path by the solution of an ODE with a
//!   given drift and binary noise;
//! * [`log_tracker`] — multiplicative tracking of positive paths with
//!   constant log-rate;
//! * [`adaptive`] — Hoelder certificates and trackers with per-interval
//!   increment sizes;
//! * [`metrics`] — Monte Carlo estimates of `L_q`-type path norms;
//! * [`crr`] — embedding multiplicative trackers into complete-market
//!   binomial trees and pricing European claims;
//! * [`config`] / [`experiment`] — the config-driven experiment harness
//!   behind the CLI.

pub mod adaptive;
pub mod config;
pub mod crr;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod log_tracker;
pub mod metrics;
pub mod ode;
pub mod plot;
pub mod preprocess;
pub mod process;
pub mod tracker;

pub use error::{Error, Result};
pub use grid::{SampledPath, TimeGrid};
