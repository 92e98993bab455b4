//! Discrete-time share cascades over a directed social graph.
//!
//! Items become salient at a node when seeded or received. A salient item the
//! node itself prefers enough is offered to each out-neighbor with a logistic
//! propensity, subject to a per-node share quota. Recipients refresh the item's
//! salience and adopt it with probability equal to their own preference.

mod cascade;
mod config;
mod graph;

pub use cascade::{
    baseline_ic, logistic, run, share_probability, step, CascadeResult, CascadeState, NodeState,
    PreferenceTable, SeedAssignments, StepStats,
};
pub use config::{CascadeConfig, QuotaMode};
pub use graph::SocialGraph;
