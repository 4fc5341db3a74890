//! Parabola calibration toolkit for electrostatically calibrated AFM and
//! Casimir force measurements.
//!
//! The crate simulates measurement campaigns in three operation modes
//! (static force, dynamic force gradient, dissipation) and runs the inverse
//! pipeline on them: a quadratic fit in the applied voltage at each actuator
//! position, a power-law fit of the curvature against actuator position that
//! locates the contact point d₀, and analyses of the extracted contact
//! potential and distance-only force.
//!
//! Modules:
//! - [`model`]: shared domain types
//! - [`forward`]: capacitance, curvatures, forces, grid synthesis
//! - [`fit`]: parabola fits, profiles, power-law calibration
//! - [`analysis`]: constant-CPD bias, fluct decomposition, cross-mode checks, QPC
//! - [`io`]: CSV/JSON artifacts, TOML configuration, the pipeline

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constants;
pub mod error;
pub mod fit;
pub mod forward;
pub mod io;
pub mod model;

pub use error::{Error, Result};
pub use model::{
    CpdProfile, DissipationParams, ForceComponents, Geometry, GridRow, MeasurementGrid, Mode,
    NoiseModel, OscillatorParams, ParabolaFit, PowerLaw, PowerLawFit, Scenario,
};
