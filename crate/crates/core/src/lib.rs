// `!(x > 0.0)` guards are deliberate: they reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod hillspec;
pub mod stability;
pub mod waves;

pub use error::{Error, Result};
