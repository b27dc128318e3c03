#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bethe;
pub mod det_rules;
pub mod error;
pub mod feedback;
pub mod locc;
pub mod measures;
pub mod solve;
pub mod sp_reduce;

pub use error::{Error, Result};
