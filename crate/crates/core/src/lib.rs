#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

//! Doubly robust high-order control barrier functions.
//!
//! The crate builds safety filters for control-affine systems that are
//! sampled with a zero-order hold, subject to a bounded additive disturbance
//! and a bounded state-estimate error. Four constraint flavours are
//! available, from the nominal high-order barrier condition up to a
//! reachability-based margin computed from an interval enclosure of the
//! states attainable during one sampling period.
//!
//! Module map:
//!
//! - [`dynamics`]: vector fields, RK4 integration with a held input, noise models.
//! - [`barrier`]: the barrier chain `psi_0 .. psi_m` and its Lie derivatives.
//! - [`margins`]: Lipschitz-based robustness margins and constant estimation.
//! - [`reach`]: interval reachable sets and tubes over one sampling period.
//! - [`filter`]: robust affine constraints and the exact box-constrained projection.
//! - [`harness`]: scenarios, closed-loop episodes, Monte Carlo studies and output.

pub mod barrier;
pub mod dynamics;
mod error;
pub mod filter;
pub mod harness;
pub mod interval;
pub mod margins;
pub mod reach;

pub use error::{Error, Result};
