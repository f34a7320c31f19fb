//! Neural-tangent-kernel scoring of cell architectures on a small, fully
//! enumerable search space.
//!
//! The pipeline: [`space`] encodes and builds networks, [`net`] runs them and
//! produces exact per-sample gradients, [`ntk`] forms the kernel of a probe
//! batch, [`metrics`] scores it, [`train`] and [`bench`] produce the trained
//! ground truth, [`rank`] correlates scores with accuracy, and [`search`]
//! uses a score to pick architectures.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod ntk;
pub mod rank;
pub mod rng;
pub mod search;
pub mod space;
pub mod train;

pub use error::{Error, Result};
