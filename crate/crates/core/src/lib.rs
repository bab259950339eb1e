//! Numerics for multi-frequency Calderon-Zygmund theory on periodic grids.
//!
//! Modules, bottom-up:
//! - [`grid`]: torus domains, grid functions, boxes, norms, averages, unitary DFT.
//! - [`freqset`]: frequency collections, distances, sumsets.
//! - [`expspan`]: spans of exponentials on boxes, projections, span constants.
//! - [`mfop`]: multi-frequency multipliers, Hilbert transform, Hormander and bump-sum symbols.
//! - [`czdecomp`]: multi-frequency Calderon-Zygmund decomposition and weak-type scans.
//! - [`sharpmax`]: projection-based sharp maximal function.
//! - [`weights`]: `A_p` and reverse Holder characteristics.
//! - [`opnorm`]: exact `L^2` norms, power-method lower bounds, growth fits.
//! - [`bochner`]: Whitney covers and scale decomposition of Bochner-Riesz symbols.
//! - [`fit`]: least-squares line fits.

pub mod error;
pub mod bochner;
pub mod czdecomp;
pub mod expspan;
pub mod fit;
pub mod freqset;
pub mod grid;
pub mod mfop;
pub mod opnorm;
pub mod sharpmax;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
