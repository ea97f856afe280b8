//! Driven cavity coupled to a three-level emitter, solved as a Lindblad master
//! equation on a truncated Fock space.
//!
//! Frequencies in [`SystemParams`](crate::params::SystemParams) are linear
//! (GHz); the generator works in rad/ns. The drive amplitude `ε` is in
//! `√(photons/ns)`, so `ε²` is the in-coupled photon flux.
//!
//! Dynamics are propagated in real coordinates restricted to the subspace
//! reachable from the initial state. Without a T1 channel the spin-down
//! manifold never builds coherences with the spin-up manifold, which cuts the
//! dimension roughly in half.

pub mod coords;
pub mod density;
pub mod generator;
pub mod integrate;
pub mod observables;
pub mod propagator;
pub mod space;
pub mod steady;

pub use coords::{RealCoords, RealSuperop, ReducedSuperop};
pub use density::DensityOperator;
pub use generator::{build_generator, build_generator_with, DriveSpec, Generator, Relaxation};
pub use integrate::{evolve, Tolerance};
pub use observables::{
    converge_fock, detected_flux, flux_operator, pumping_rate, pumping_rate_fixed, pumping_rate_for_flux,
    reflection_spectrum, weak_drive_reflection, Converged, CountModel, EngineOptions, SignalIntegrals, Spectrum,
    TrajectoryRow,
};
pub use space::{HilbertConfig, Level, SparseOp};
pub use steady::{steady_state, steady_state_from};
