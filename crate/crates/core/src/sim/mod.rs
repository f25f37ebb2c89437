//! Event-driven simulation of a Chord-style ring under churn.
//!
//! Nodes join, fail ungracefully and stabilize at exponential rates; the
//! engine processes one event at a time against a single [`Network`] and
//! periodically takes non-mutating metric samples (pointer correctness,
//! probe lookups). Runs are fully determined by their [`SimConfig`],
//! including the seed.

mod config;
mod engine;
mod metrics;
mod network;
mod protocol;

pub use config::{ConfigError, SimConfig};
pub use engine::{
    next_event, run, run_with, ClassStats, Event, EventKind, RunError, RunOutput, Simulation,
    TransitionClass, TransitionStats, TRANSITION_CLASSES,
};
pub use metrics::{sample_metrics, MetricsSample};
pub use network::{Network, NodeState};
pub use protocol::{
    join, lookup, stabilize_finger, stabilize_successor, FingerStab, JoinOutcome, LookupResult,
};
