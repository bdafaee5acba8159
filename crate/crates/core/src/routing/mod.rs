//! Routing planes.
//!
//! The cluster scheme (IDLB): each cluster controller collects node state
//! reports, maintains load-aware forwarding trees toward its exit directions
//! and locally attached terminals, and distributes per-node tables. Packets
//! between clusters follow the geographic switching table. The benchmark
//! (SSPF) source-routes packets on global min-hop paths ignoring link loads.

mod graph;
mod sspf;
mod update;

pub use graph::{build_cluster_graph, shortest_tree, ClusterGraph, GraphEdge, GraphInputs, TreeResult};
pub use sspf::{bfs_dist, build_sspf_graph, min_hop_route, route_valid, SspfGraph};
pub use update::{network_update, note_lame_duck, ClusterRuntime, UpdateInputs, UpdateOutcome};

use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterId;
use crate::geoaddr::{AreaSummary, TerminalAddress};

/// Load-balancing knobs. Thresholds act on reported average buffer
/// occupancy fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingConfig {
    /// Occupancy where link weights start to ramp.
    pub theta_warn: f64,
    /// Occupancy where links are excluded from new routes.
    pub theta_block: f64,
    /// Ramp slope between the thresholds.
    pub alpha: f64,
    /// Equal-cost alternatives considered when spreading routes.
    pub k_paths: usize,
    /// Occupancy below which displaced routes may move back.
    pub theta_return: f64,
    /// Displaced routes re-optimized per cluster per update.
    pub return_budget: usize,
    /// Lookahead for the inter-plane shutdown warning, seconds.
    pub warn_horizon_s: f64,
    /// Weight of the newest occupancy report in the controller EMA.
    pub ema_weight: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            theta_warn: 0.6,
            theta_block: 0.9,
            alpha: 8.0,
            k_paths: 4,
            theta_return: 0.3,
            return_budget: 2,
            warn_horizon_s: 2.0,
            ema_weight: 0.7,
        }
    }
}

/// Routing weight of a link at a given occupancy. `None` excludes the link
/// (at or above the block threshold, or flagged).
pub fn link_weight(cfg: &RoutingConfig, occupancy: f64, flagged: bool) -> Option<f64> {
    if flagged || occupancy >= cfg.theta_block {
        return None;
    }
    if occupancy < cfg.theta_warn {
        Some(1.0)
    } else {
        Some(1.0 + cfg.alpha * (occupancy - cfg.theta_warn) / (cfg.theta_block - cfg.theta_warn))
    }
}

/// Penalty weight for a readmitted (blocked) link: ascending in occupancy
/// and dominated by no regular path.
pub fn readmission_weight(cfg: &RoutingConfig, occupancy: f64) -> f64 {
    1000.0 + cfg.alpha * (occupancy - cfg.theta_warn).max(0.0) / (cfg.theta_block - cfg.theta_warn)
}

/// Periodic node state delivered to the cluster controller.
#[derive(Debug, Clone)]
pub struct NodeStateReport {
    pub node_flat: u16,
    pub time_s: f64,
    /// Average occupancy fraction of each outgoing ISL buffer since the
    /// previous report, keyed by neighbor flat index.
    pub isl_occupancy: Vec<(u16, f64)>,
    /// Any outgoing port at or above the block threshold.
    pub node_overloaded: bool,
    /// The node is about to cross the inter-plane shutdown latitude.
    pub shutdown_warning: bool,
    /// Terminals currently attached to this satellite.
    pub attached: Vec<TerminalAddress>,
}

/// Exact-address forwarding entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactEntry {
    /// The destination terminal hangs off this very node.
    Downlink,
    /// Next hop toward the serving satellite.
    Via(u16),
}

/// Per-node forwarding state installed by the controller.
#[derive(Debug, Clone, Default)]
pub struct NodeTable {
    /// Exact-address entries, sorted by address.
    pub exact: Vec<(TerminalAddress, ExactEntry)>,
    /// Next hop per (direction, salt): flat index of the neighbor.
    pub direction_next: [Vec<Option<u16>>; 4],
    /// Next hop toward each cluster member (anchor routing), by member position.
    pub member_next: Vec<Option<u16>>,
}

impl NodeTable {
    pub fn lookup_exact(&self, addr: TerminalAddress) -> Option<ExactEntry> {
        self.exact
            .binary_search_by_key(&addr, |(a, _)| *a)
            .ok()
            .map(|i| self.exact[i].1)
    }
}

/// One cluster's installed tables: per-node forwarding state plus the area
/// summary snapshot they were computed against.
#[derive(Debug, Clone)]
pub struct ClusterTables {
    pub cluster: ClusterId,
    pub version: u64,
    pub computed_at_s: f64,
    pub summary: Rc<AreaSummary>,
    /// Indexed by member position within the cluster.
    pub node: Vec<NodeTable>,
}

/// Forwarding targets the controller maintains sticky trees for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TargetKey {
    /// Exit toward a neighbor cluster; `salt` diversifies equal-cost ties.
    Direction { dir: u8, salt: u8 },
    /// A terminal attached inside the cluster or at a monitored interface
    /// node; the tree is rooted at its serving satellite.
    Terminal(TerminalAddress),
}

/// A sticky forwarding tree toward one target.
#[derive(Debug, Clone)]
pub struct TargetTree {
    pub root_flats: Vec<u16>,
    /// Next hop (flat) per member position; `None` at the roots and for
    /// unreachable members.
    pub next_hop: Vec<Option<u16>>,
    /// Directed member-level links the tree uses.
    pub used_links: Vec<(u16, u16)>,
    /// Built while congestion shaped it; candidate for re-optimization.
    pub displaced: bool,
}

/// Terminals recently handed over away: the old cluster keeps forwarding to
/// the old satellite, which still delivers during the make-before-break
/// grace window. Keyed by address: (old serving satellite, expiry epoch).
pub type LameDuckMap = BTreeMap<TerminalAddress, (u16, u64)>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_profile_matches_thresholds() {
        let cfg = RoutingConfig::default();
        assert_eq!(link_weight(&cfg, 0.0, false), Some(1.0));
        assert_eq!(link_weight(&cfg, 0.59, false), Some(1.0));
        let w = link_weight(&cfg, 0.75, false).unwrap();
        assert!((w - 5.0).abs() < 1e-12, "w = {w}");
        assert_eq!(link_weight(&cfg, 0.9, false), None);
        assert_eq!(link_weight(&cfg, 0.95, false), None);
        assert_eq!(link_weight(&cfg, 0.1, true), None);
    }

    #[test]
    fn readmission_is_monotone_in_occupancy() {
        let cfg = RoutingConfig::default();
        let w1 = readmission_weight(&cfg, 0.9);
        let w2 = readmission_weight(&cfg, 1.0);
        assert!(w2 > w1);
        assert!(w1 > 100.0);
    }

    #[test]
    fn exact_lookup() {
        let a1 = TerminalAddress::new(crate::geoaddr::AreaId(10), 1);
        let a2 = TerminalAddress::new(crate::geoaddr::AreaId(10), 2);
        let table = NodeTable {
            exact: vec![(a1, ExactEntry::Downlink), (a2, ExactEntry::Via(7))],
            ..Default::default()
        };
        assert_eq!(table.lookup_exact(a1), Some(ExactEntry::Downlink));
        assert_eq!(table.lookup_exact(a2), Some(ExactEntry::Via(7)));
        let a3 = TerminalAddress::new(crate::geoaddr::AreaId(11), 1);
        assert_eq!(table.lookup_exact(a3), None);
    }
}
