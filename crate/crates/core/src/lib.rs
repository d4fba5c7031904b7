//! Adiabatic quantum cycles of spins with combined dipole and quadrupole coupling.
//!
//! The reduced Hamiltonian is `Σz + λ Σx²` in units of `γ_S B`. Around it the crate
//! builds labeled spectra, Berry phases of arbitrary parameter cycles, longitudinal and
//! transverse non-adiabatic corrections, exact time evolution in the lab and rotating
//! frames, and the four spin-1/2 holonomic entangling cycle.

pub mod berry;
pub mod dynamics;
pub mod entangle;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod nonadiabatic;
pub mod quadrature;
pub mod roots;
pub mod schedule;
pub mod spin;
pub mod spline;

pub use berry::{berry_phase_adiabatic, gauge_field, gauge_field_sphere, BerryPhase, GaugeField};
pub use dynamics::{CycleResult, Integrator, PulseShape};
pub use entangle::{EntanglementResult, FourSpinState, SymmetricBasis};
pub use error::{Error, Result};
pub use hamiltonian::{LabeledSpectrum, ParityBlock, ReducedHamiltonian, SpectrumEntry};
pub use nonadiabatic::CoriolisParams;
pub use schedule::{CycleSchedule, Segment};
pub use spin::{EulerAngles, SpinRep};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// Version string written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
