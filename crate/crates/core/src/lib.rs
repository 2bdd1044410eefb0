//! Performance model for measurement-device-independent three-party quantum
//! communication: conference key agreement (QCC) and secret sharing (QSS)
//! through a linear-optical GHZ analyzer, fed by weak coherent, heralded
//! SPDC or QND-filtered sources.
//!
//! Layers, bottom up:
//!
//! - [`params`]: physical parameters and the config format.
//! - [`fock`]: exact photon-number propagation and the threshold click model.
//! - [`gains`]: closed-form and quadrature gains for phase-randomized sources.
//! - [`decoy`]: two-decoy single-photon bounds.
//! - [`keyrates`], [`mermin`]: key rates, distance sweeps and Mermin bounds.
//! - [`montecarlo`]: a sampling oracle for the analytic gains.
//!
//! Heavy loops take an [`Exec`] and run on rayon when the `parallel`
//! feature is enabled (the default).

pub mod decoy;
pub mod error;
pub mod exec;
pub mod fock;
pub mod gains;
pub mod keyrates;
pub mod math;
pub mod mermin;
pub mod montecarlo;
pub mod params;

pub use error::{Error, Result};
pub use exec::Exec;
