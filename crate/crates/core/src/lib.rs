// NaN-rejecting guards are written as `!(x < limit)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exactprop;
pub mod io;
pub mod landscape;
pub mod lattice;
pub mod model;
pub mod saddles;
pub mod semiclassics;
pub mod tracking;

pub use error::{Error, Result};
pub use num_complex::Complex64;
