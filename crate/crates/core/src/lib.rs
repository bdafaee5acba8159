//! Packet-level discrete-event simulator of a Walker-star LEO mega-constellation
//! with inter-satellite links.
//!
//! The crate models the P-1440 reference system (30 planes x 48 satellites at
//! 600 km) and two routing schemes on top of it: a cluster-based distributed
//! SDN scheme with load-balanced intra-cluster routing and geographic
//! inter-cluster forwarding (IDLB), and a source-routed shortest-path
//! benchmark (SSPF). Besides the event-driven engine, the crate exposes the
//! closed-form analytics of the system design: cluster signaling cost, hop
//! distances, visibility windows and ISL delay envelopes.

pub mod cluster;
pub mod engine;
pub mod error;
pub mod geoaddr;
pub mod ground;
pub mod orbit;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod topology;

pub use error::ConfigError;
pub use orbit::{ConstellationConfig, SatId, SatPosition};
pub use scenario::{Protocol, Scenario};
