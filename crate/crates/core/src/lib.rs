//! Neural compact modeling and reverse design of ferroelectric MFM capacitors.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`oracle`] generates polarization–voltage hysteresis sweeps for a pair of
//!    layer thicknesses (dead layer and ferroelectric layer).
//! 2. [`dataset`] samples a thickness grid, holds out target devices, adds
//!    Gaussian target noise and persists the result as CSV.
//! 3. [`surrogate`] trains a fully-connected network mapping
//!    `(v, dir, t_dl, t_fl)` to polarization.
//! 4. [`inverse`] recovers thicknesses that reproduce a target sweep, either by
//!    descending the input gradient of the frozen network ([`gradients`],
//!    [`inverse::grad`]) or by Gaussian-process Bayesian optimization
//!    ([`inverse::bayes`]).
//!
//! [`bench`] holds the cycle-count time projections and the speedup
//! measurement, [`plot`] renders SVG overlays, and [`config`] parses the flat
//! `key = value` configuration used by the command-line tool.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gradients;
pub mod inverse;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
pub use oracle::{DeviceParams, Direction, OracleConfig, SweepCurve, SweepPoint};
pub use surrogate::SurrogateModel;
