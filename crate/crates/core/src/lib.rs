//! Simulation and analysis toolkit for cavity-enhanced optical readout of a
//! single solid-state spin.
//!
//! The crate is split along the physics:
//!
//! - [`params`] and [`config`]: device rates, detection chain and the flat
//!   key-value configuration format.
//! - [`analytic`]: closed-form input-output theory (reflection coefficients,
//!   polarization interferometry, single-photon reflection/flip probabilities).
//! - [`lindblad`]: the driven cavity + three-level emitter master equation on a
//!   truncated Fock space, with propagators, steady states and count integrals.
//! - [`readout`]: Poisson/threshold readout fidelities, window optimization and
//!   the parameter sweeps built on top of the master equation.
//! - [`montecarlo`]: seeded two-state counting simulations with detector
//!   imperfections, used as a brute-force oracle for [`readout`].
//! - [`fitting`]: damped least-squares extraction of decay constants, pumping
//!   parameters and T1.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod error;
pub mod export;
pub mod fitting;
pub mod lindblad;
pub mod montecarlo;
pub mod params;
pub mod readout;
pub mod units;

pub use error::{Error, Result};
pub use params::{Budget, DerivedParams, DetectionChain, Spin, SystemParams};
