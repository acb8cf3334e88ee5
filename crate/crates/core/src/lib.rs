//! Wireheading testbed.
//!
//! Two halves share this crate:
//!
//! * [`pomdp`] solves small finite POMDPs with observation-based rewards
//!   exactly and certifies when a reward-channel action strictly dominates
//!   every task action.
//! * [`env`], [`agent`], [`metrics`] and [`harness`] train tabular
//!   REINFORCE agents on self-grading tasks under the Control, Honest and
//!   Selfgrade reward wirings and measure grade inflation.

// Range checks are written `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod pomdp;

pub use error::{Error, Result};
