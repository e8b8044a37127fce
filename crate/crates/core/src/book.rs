//! The user guide, embedded chapter by chapter so its examples never rot.
//!
//! Each module below carries one chapter of the mdBook guide under `book/`
//! as its documentation. `cargo test --doc` therefore compiles and runs
//! every code block in the guide against the current API: if the library
//! drifts, the build breaks instead of the prose.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/sensitivity-model.md")]
pub mod sensitivity_model {}

#[doc = include_str!("../../../book/src/interval-estimator.md")]
pub mod interval_estimator {}

#[doc = include_str!("../../../book/src/population-oracles.md")]
pub mod population_oracles {}

#[doc = include_str!("../../../book/src/policies.md")]
pub mod policies {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
