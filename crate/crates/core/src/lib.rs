#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod ising;
pub mod measurement;
pub mod phonon;
pub mod populations;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
pub use populations::Populations;
