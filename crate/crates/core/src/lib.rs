//! Selective quantum state tomography.
//!
//! A single record of outcomes from a fixed POVM built on a complete set of
//! mutually unbiased bases suffices to estimate any individual density-matrix
//! element, or the mean of any operator with bounded MUB coefficients, with a
//! copy count that depends only on the target precision.
//!
//! * [`field`] / [`mub`]: finite fields and the MUB families built on them.
//! * [`qstate`]: density matrices, Hermitian eigensolver, norms.
//! * [`measurement`]: POVM outcome distributions, sampling, record files.
//! * [`estimator`]: element and operator-mean estimators, sample planners.
//! * [`tomography`]: full-state assembly and max-norm projection onto states.

pub mod error;
pub mod estimator;
pub mod field;
pub mod measurement;
pub mod mub;
pub mod qstate;
pub mod tomography;

pub use error::{Result, SqstError};
