//! Statistics of edge-combable functions over word spheres of hyperbolic
//! groups, computed from strongly Markov codings.
//!
//! The crate is organised bottom-up:
//!
//! * [`coding`] builds and analyses the coding graph,
//! * [`weights`] attaches edge weights (homomorphisms, word length, tables),
//! * [`spectral`] computes Perron roots and pressure of weighted transfer
//!   matrices and derives drift, variance and covariance,
//! * [`enumerate`] runs exact dynamic programs over word spheres,
//! * [`limits`] checks the averaging, central, large deviation,
//!   multidimensional and local limit laws against both.

#![allow(clippy::needless_range_loop)]

pub mod bigutil;
pub mod coding;
pub mod enumerate;
pub mod error;
pub mod floatrepr;
pub mod limits;
pub mod perron;
pub mod quadrature;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
