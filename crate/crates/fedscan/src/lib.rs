//! Federated detection of correlated anomaly subgraphs across private
//! attributed networks, aligned through a shared public network.
//!
//! Each data owner scans its own network for a connected subgraph of
//! anomalously small p-values, maps that subgraph onto the public network
//! through pre-computed alignment probabilities, and reports only the public
//! projection plus scalar scores. The coordinator groups owners into
//! coalitions, fuses their public anomalies, and broadcasts the result back;
//! the loop repeats until the public anomaly stabilizes.
//!
//! ```
//! use fedscan::federation::{run_federation, FederationConfig};
//! use fedscan::synth::{generate_scenario, ScenarioSpec};
//!
//! let spec = ScenarioSpec {
//!     rng_seed: 7,
//!     n_owners: 2,
//!     nodes_per_owner: 40,
//!     public_nodes: 25,
//!     planted_private_size: 6,
//!     planted_public_size: 5,
//!     ..ScenarioSpec::default()
//! };
//! let scenario = generate_scenario(&spec)?;
//! let run = run_federation(&FederationConfig::default(), scenario.owners, &scenario.public)?;
//! assert!(!run.result.rounds.is_empty());
//! assert!(run.result.rounds.iter().all(|r| r.objective >= -1e-9));
//! # Ok::<(), fedscan::Error>(())
//! ```

pub mod alignment;
pub mod coordinator;
pub mod error;
pub mod federation;
pub mod graph;
pub mod participant;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
