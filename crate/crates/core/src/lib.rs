//! Phase-space numerics for dispersive equations with rough coefficients.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature enables a
//! rayon-backed parallel map for batch operations; without it every batch
//! runs sequentially and produces identical results.
//!
//! Conventions used throughout:
//!
//! * spatial dimension `d` is 1 or 2; fields live on a periodic box `[-L, L)^d`;
//! * the evolution equation is `i ∂_t u = a^w(x, t, D) u`, so packets travel
//!   along `ẋ = ∂_ξ p`, `ξ̇ = -∂_x p`;
//! * the forward discrete Fourier transform uses the kernel `e^{-iζy}`.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod estimates;
pub mod fbi;
pub mod fft;
pub mod fit;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod math;
pub mod par;
pub mod phase_space;
pub mod propagate;
pub mod symbols;
pub mod tubes;

pub use error::{Error, Result};
pub use grid::{SpatialField, SpatialGrid};
pub use num_complex::Complex64;
pub use phase_space::{Lattice, PhasePoint, PhaseSpaceRegion, ScaleParams};
