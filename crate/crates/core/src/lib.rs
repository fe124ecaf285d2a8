//! Disordered pinning on heavy-tailed renewals: kernels and renewal tables,
//! the pure model, quenched partition functions, the chaos functional and
//! critical-point bounds.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod csv;
pub mod error;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod renewal;
pub mod partition;
pub mod homogeneous;
pub mod disorder;
pub mod quenched;
pub mod chaos;
pub mod bounds;

pub use chaos::ChaosScales;
pub use disorder::{DisorderField, DisorderLaw};
pub use error::{PinError, Result};
pub use partition::{Boundary, LogPartition};
pub use renewal::{RenewalKernel, RenewalTables, SlowlyVarying};
pub use stats::Estimate;
