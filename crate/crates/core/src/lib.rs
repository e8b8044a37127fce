//! Sharp interval estimates of conditional average treatment effects under
//! a marginal sensitivity model, with minimax-regret policies.

pub mod book;
pub mod bounds;
pub mod data;
pub mod error;
pub mod kernel;
pub mod msm;
pub mod oracle;
pub mod policy;
pub mod propensity;
pub mod simulate;

pub use error::{Error, Result};
