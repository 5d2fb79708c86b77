//! Online learning with cumulative constraint violation control.
//!
//! The crate provides an adaptive Hedge learner, a Lyapunov-driven
//! constrained expert policy built on it, a δ-cover reduction for convex
//! decision sets, an adaptive online gradient descent policy for smooth
//! losses, synthetic environments, and an experiment harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex_policy;
pub mod environments;
pub mod error;
pub mod expert_policy;
pub mod geometry;
pub mod harness;
pub mod hedge;
pub mod model;

pub use error::{CocoError, Result};
