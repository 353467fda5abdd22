//! p-capacitary potentials and the Moser-approximated weak inverse mean
//! curvature flow on asymptotically conical warped products.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod capacity;
pub mod config;
pub mod error;
pub mod geometry;
pub mod imcf;
pub mod linalg;
pub mod presets;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
