//! Hierarchical intrusion detection for clustered wireless sensor networks,
//! with a discrete-event simulator to exercise it.

pub mod agent;
pub mod attacks;
pub mod detectors;
pub mod engine;
pub mod error;
pub mod failover;
pub mod metrics;
pub mod policy;
pub mod response;
pub mod scenario;
pub mod simcore;
pub mod topology;

pub use error::{Error, Result};
