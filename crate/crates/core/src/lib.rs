//! Lie time-splitting for the 1+1 dimensional nonlinear Dirac equation with
//! Thirring and Gross–Neveu self-interactions, together with checkers for the
//! discrete estimates the scheme satisfies.
//!
//! * [`field`]: meshes, spinor fields, initial data and L² geometry.
//! * [`scheme`]: exact transport, the nonlinear cell flow and the run driver.
//! * [`analysis`]: triangle masses, pointwise bounds, the Glimm-type functional
//!   and explicit estimate constants.
//! * [`experiments`]: self-convergence, perturbation and benchmark studies.
//! * [`io`]: run configuration, checkpoints and diagnostics formats.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod field;
pub mod io;
pub mod scheme;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use field::{
    l2_distance, l2_norm, restrict_to_coarse, sample_initial_data, InitialProfile, Mesh,
    OdeOptions, SamplingMode, SchemeParams, SpinorField,
};
pub use num_complex::Complex64;
pub use scheme::{
    nonlinear_flow, nonlinear_step, oracle_flow, run, split_step, transport_step, History,
    StepRecord,
};
