//! Numerical laboratory for a two-degree-of-freedom fast-slow Hamiltonian
//! system with energy `½η² + ½ζ² + ½ε⁻²ω(y)²z²`.
//!
//! The crate integrates the exact dynamics at finite `ε`, builds the
//! homogenized limit and its second-order expansion (oscillatory correctors
//! plus an averaged linear system), and evaluates the Hertz thermodynamic
//! quantities attached to the fast oscillator.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod dynamics;
pub mod error;
pub mod expansion;
pub mod experiments;
pub mod homogenized;
pub mod integrate;
pub mod model;
pub mod phase;
pub mod thermo;

pub use dynamics::{ActionAngleState, CartesianState};
pub use error::{Error, Result};
pub use expansion::{AveragedCorrection, CorrectorValues, ResidualReport, ResidualSettings};
pub use experiments::Setup;
pub use homogenized::HomogenizedState;
pub use integrate::{Trajectory, TrajectoryMeta};
pub use model::{
    derived_constants, make_frequency, DerivedConstants, FrequencyModel, LogDerivatives, Preset,
    SystemParams,
};
pub use thermo::{EnergyExpansion, ThermoExpansion, ThermoState};
