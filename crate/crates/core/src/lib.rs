#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod dirichlet1d;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod operator;

pub use error::{Error, Result};
