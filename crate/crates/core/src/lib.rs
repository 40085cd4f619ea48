//! Numerical laboratory for the stability of a strong contact-discontinuity
//! wave of the one-dimensional compressible Navier–Stokes equations in
//! Lagrangian coordinates.
//!
//! * [`profile`] builds the contact-wave ansatz and a heat-kernel reference.
//! * [`lagrangian`] evolves the full viscous heat-conducting flow.
//! * [`diagnostics`] measures norms, entropy functionals and decay rates.
//! * [`experiments`] runs the named scenarios and produces pass/fail flags.
//! * [`io`] reads run configurations and writes series, summaries and snapshots.

// NaN-rejecting `!(x > 0.0)` guards and multi-array index loops are intended
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lagrangian;
pub mod numerics;
pub mod params;
pub mod profile;

pub use error::{DiagnosticsError, ExperimentError, FlowError, ParamError, ProfileError};
pub use params::{Delta0, Grid, PhysParams};
