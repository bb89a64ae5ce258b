// `!(a < b)` is used deliberately to reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod mechanism;
pub mod optimize;
pub mod pipeline;
pub mod reference;
pub mod report;
pub mod sim;
pub mod spring;
pub mod zerodyn;

pub use error::{Error, Result};
