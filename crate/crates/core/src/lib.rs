//! Quantum-jump correlation spectroscopy for a qubit coupled to long-lived
//! two-level systems (TLSs) and a Markovian thermal bath.
//!
//! The crate covers the full analysis chain:
//!
//! * [`solomon`]: exact solutions of the coupled rate (Solomon) equations.
//! * [`jumpsim`]: event-driven simulation of the joint qubit/TLS Markov chain,
//!   stroboscopic jump traces and synthetic IQ readout.
//! * [`traceio`]: file formats and IQ-to-state discrimination.
//! * [`conditioning`]: jump detection, g₂ estimation and selection-pattern
//!   conditioned averages.
//! * [`fitting`]: joint least-squares estimation of the coupling rates.
//! * [`spectroscopy`]: frequency/field sweeps, peak detection and track linking.
//! * [`synthetic`]: expected-value test data generated from the rate model.
//!
//! Units are SI throughout: seconds, 1/s, Hz and V/m.

pub mod conditioning;
pub mod error;
pub mod fitting;
pub mod jumpsim;
pub mod solomon;
pub mod spectroscopy;
pub mod synthetic;
pub mod traceio;

pub use conditioning::{ConditionedTrajectory, G2Curve, SelectionPattern};
pub use error::{Error, Result};
pub use fitting::{FitResult, FitSpec};
pub use jumpsim::{JumpTrace, ReadoutModel, SimConfig};
pub use solomon::{PopulationVector, RateSet, SolomonSystem};
