//! Private aggregation of teacher ensembles: noisy vote release (Gaussian
//! and sparse-vector), zCDP accounting, passive and active student
//! pipelines, synthetic data generators and an experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod dp;
pub mod error;
pub mod harness;
pub mod learners;
pub mod pipelines;
pub mod seed;
pub mod synthdata;

pub use error::{Error, Result, SessionError};
