//! Numerical isomonodromy laboratory.
//!
//! Linear 2×2 Fuchsian and irregular systems in the spectral variable, their
//! monodromy and Stokes data, continuous and discrete Schlesinger
//! transformations for the sixth and fifth Painlevé equations, the two
//! degeneration limits from Painlevé VI to Painlevé V, and a solver for the
//! simultaneous triangularization of a pair of SL(2,C) matrices.

pub mod algebra;
pub mod error;
pub mod fuchsian;
pub mod ladder;
pub mod limits;
pub mod ode;
pub mod painleve5;
pub mod painleve6;
pub mod special;
pub mod stats;
pub mod triangularizer;

pub use algebra::{c, Mat2C, C};
pub use error::{Error, Result};
