//! Pseudospectral solver and estimate harness for a moderate-amplitude
//! shallow-water wave equation on a periodic domain.
//!
//! - [`spectral`]: grids, transforms, Fourier multipliers, Sobolev norms.
//! - [`model`]: parameters, the nonlocal flux and both right-hand-side forms.
//! - [`timestep`]: RK4 and an embedded 5(4) pair with breaking detection.
//! - [`harness`]: randomized checks of the operator and commutator estimates.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod model;
pub mod spectral;
pub mod timestep;

pub use model::{FluxVariant, ModelParams, RhsChoice};
pub use spectral::{Field, Grid, Spectrum};
