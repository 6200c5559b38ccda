//! Simulation and closed-form analysis of robust (interference-assisted) cooling of a
//! trapped ion: a three-level atom whose EIT and Stark-shift couplings cancel the
//! blue-sideband heating amplitude.
//!
//! The crate is layered bottom-up:
//!
//! * [`quantum`]: dense operator algebra on `internal ⊗ Fock` spaces.
//! * [`model`]: Hamiltonians, emission channels and implementation parameter maps.
//! * [`dynamics`]: Lindblad generator, steady state, time evolution and rate fits.
//! * [`analytics`]: closed-form rates and the numerical fluctuation spectrum.
//! * [`montecarlo`]: quantum-jump trajectories, including small multi-mode chains.
//! * [`scan`]: parameter scans and operating-point reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod quantum;
pub mod scan;

pub use error::{Assessed, Error, Result, Warning};
pub use model::{CouplingOrder, ModelParams};
