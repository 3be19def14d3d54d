//! The narrative guide, compiled straight from `book/src/`.
//!
//! mdbook renders the chapters; including them here makes every code block
//! a doc-test of this crate, so `cargo test --doc` keeps the book honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/targets.md")]
pub mod targets {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/chebyshev.md")]
pub mod chebyshev {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/config.md")]
pub mod config {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
