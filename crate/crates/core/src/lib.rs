//! Deterministic control-plane simulator for model-serving failover.
//!
//! The crate models a small edge fleet of accelerator servers hosting DNN
//! inference applications. Each application belongs to a model *family* with
//! several variants trading memory for accuracy. When servers or whole sites
//! fail, a failover policy restores service, either from pre-placed warm
//! backups or by loading replacement variants on the surviving servers.
//!
//! ```text
//!   scenario ──► engine ──► run log + per-app timelines ──► metrics
//!                  │
//!                  ├─ detector    heartbeat gaps → failure declarations
//!                  ├─ proactive   warm-backup placement (exact solver)
//!                  ├─ progressive reactive variant sizing + worst-fit
//!                  └─ baselines   full-size warm / cold reference policies
//! ```
//!
//! Everything is driven by a discrete-event loop over integer-microsecond
//! virtual time; identical `(scenario, seed)` inputs reproduce byte-identical
//! run logs and metrics.

pub mod baselines;
pub mod catalog;
pub mod cluster;
pub mod detector;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod proactive;
pub mod progressive;
pub mod scenario;
pub mod sweep;
pub mod synth;

pub use baselines::Policy;
pub use catalog::Catalog;
pub use cluster::ClusterState;
pub use engine::{run, RunArtifacts};
pub use error::{Error, Result};
pub use scenario::Scenario;
