//! Joint satellite association, uplink power control and bandwidth allocation
//! for integrated LEO/terrestrial networks.

pub mod alternating;
pub mod assoc_solver;
pub mod channel;
pub mod convex_solver;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod geometry;
pub mod instance;
pub mod simplex;
pub mod units;

pub use error::{Error, Result};
