//! Simulation laboratory for moderately interacting particles driven by a common
//! environmental noise and their stochastic compressible Navier–Stokes limit.
//!
//! - [`params`]: scaling exponents and the admissible δ-window
//! - [`kernels`]: Gaussian potential and friction kernels, closed-form moments
//! - [`particles`]: the N-particle Stratonovich system
//! - [`spde`]: the limiting stochastic PDE on a periodic grid
//! - [`empirical`]: mollified empirical fields and the empirical energy
//! - [`besov`]: Littlewood–Paley blocks and negative-order distances
//! - [`harness`]: coupled runs, convergence studies, CSV reports

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod besov;
pub mod cells;
pub mod empirical;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod noise;
pub mod params;
pub mod particles;
pub mod snapshot;
pub mod spde;

pub use error::{Error, Result};
