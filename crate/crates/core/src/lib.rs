//! Analytics over asynchronous team communication recorded as timestamped
//! actor→document access logs.
//!
//! Each case (patient) yields a directed bipartite temporal network: actors
//! (HCPs) write notes and read notes. On top of that network the crate
//! computes structural measures, centralization indices for directed
//! bipartite graphs, time-respecting reachability with per-edge latency and
//! frequency, node importance by perturbation, and an outcome-associated
//! effectiveness metric learned per cohort group.

pub mod cohort;
pub mod error;
pub mod measures;
pub mod metric;
pub mod network;
pub mod perturbation;
pub mod synthetic;
pub mod temporal;
pub mod time;

pub use error::{Error, Result};
pub use measures::MeasureId;
pub use network::{CommNetwork, NodeKind, NodeRef, TemporalEdge, TimeWindow};
