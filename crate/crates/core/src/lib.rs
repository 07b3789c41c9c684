// Comparisons like `!(x <= tol)` are deliberate: they treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod docs;
pub mod error;
pub mod expectations;
pub mod homogeneous;
pub mod linalg;
mod par;
pub mod report;
pub mod splitting;
pub mod verify;

pub use error::{CprError, Result};
pub use par::set_thread_limit;
