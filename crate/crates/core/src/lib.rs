// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod constants;
pub mod error;
pub mod grid;
pub mod observables;
pub mod reduce;
pub mod snapshot;
pub mod special;
pub mod thermal;
pub mod twa;
pub mod two_mode;

pub use error::{Error, Result};
pub use num_complex::Complex64;
