//! Frequency-selective extrapolation of two-dimensional signals.
//!
//! A signal known only on a support area is approximated by a sparse,
//! iteratively built expansion into orthogonal basis functions. Because the
//! functions lose their orthogonality once scalar products are restricted to
//! the weighted support, each estimated expansion coefficient is compensated,
//! either exactly from the weighted Gram matrix ([`Compensation::Full`]) or by
//! a constant factor ([`Compensation::Constant`]).
//!
//! Two engines are provided:
//!
//! * [`spatial`] evaluates every projection in the sample domain and works with
//!   any [`BasisSet`]. It is slow and serves as the reference.
//! * [`spectral`] runs the whole iteration on the DFT spectrum of the weighted
//!   residual, updating it by circular shifts of the weight spectrum.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod basis;
pub mod cost;
mod error;
pub mod gram;
pub mod grid;
pub mod spatial;
pub mod spectral;
pub mod trace;

pub use basis::{BasisKind, BasisSet, Index};
pub use error::{Error, Result};
pub use grid::{Label, Psnr, Rect, RegionMask, SampleGrid, WeightField};
pub use spatial::{Compensation, ExtrapolationConfig, ModelState, SelectionRule};
pub use spectral::{DirectDft, Spectrum, Transform2d};
pub use trace::TraceRecord;

pub use num_complex::Complex64;
