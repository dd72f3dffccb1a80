// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ame;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod io;
pub mod moments;
pub mod oracle;
pub mod pair_approx;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
