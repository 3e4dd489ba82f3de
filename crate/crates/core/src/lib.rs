//! Simulation engine for Bayesian adaptive trials.
//!
//! A [`spec::TrialSpec`] describes arms, outcome model, looks and decision
//! thresholds. [`engine`] runs single trials, [`par`] runs seeded batches,
//! [`metrics`] summarises them and [`calibration`] tunes a threshold against
//! a target. File formats and scenario grids live in [`io`].

pub mod engine;
pub mod outcome;
pub mod spec;
pub mod stats;
pub mod stochastic;
pub mod par;
pub mod metrics;
pub mod calibration;
pub mod io;
