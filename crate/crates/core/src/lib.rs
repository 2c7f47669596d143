//! Multi-rate EMT / shifted-frequency EMT co-simulation.
//!
//! Modules, bottom up:
//! - [`spectral`]: ESPRIT estimation and analytic-signal construction.
//! - [`network`], [`nodal`], [`circuit`], [`emt`], [`sfemt`]: trapezoidal
//!   nodal solvers on instantaneous values and on complex envelopes.
//! - [`wave_link`]: Bergeron line buffers and real-to-envelope converters.
//! - [`steady`]: sinusoidal steady state for starting runs away from rest.
//! - [`orchestrator`]: the multi-rate exchange loop and monolithic reference.
//! - [`scenario`], [`results`], [`report`]: file formats, metrics, reports.

pub mod circuit;
pub mod emt;
pub mod error;
pub mod linalg;
pub mod network;
pub mod nodal;
pub mod orchestrator;
pub mod report;
pub mod results;
pub mod scenario;
pub mod sfemt;
pub mod spectral;
pub mod steady;
pub mod wave_link;

pub use error::{Error, Result};
