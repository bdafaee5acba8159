//! Controller network update.
//!
//! Per update epoch each cluster controller: scans the status of its member
//! and monitored interface nodes (missing report = failure, overload or
//! inter-plane warning = flag), refreshes the geographic switching view, and
//! maintains load-aware forwarding trees toward its exit directions and each
//! attached terminal. Trees are sticky: they move only when a used link
//! disappears or its reported occupancy crosses the block threshold, and a
//! bounded number of displaced trees per update may move back once the
//! shortest route has drained. The resulting per-node instructions are
//! distributed as one immutable table set per cluster version.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::cluster::{ClusterId, ClusterMap, Direction};
use crate::geoaddr::{AreaSummary, TerminalAddress};
use crate::orbit::ConstellationConfig;
use crate::routing::graph::{build_cluster_graph, shortest_tree, GraphInputs};
use crate::routing::{
    ClusterTables, ExactEntry, LameDuckMap, NodeStateReport, NodeTable, RoutingConfig, TargetKey,
    TargetTree,
};
use crate::topology::TopologySnapshot;

/// Controller-local persistent state.
#[derive(Debug, Clone)]
pub struct ClusterRuntime {
    pub cluster: ClusterId,
    pub version: u64,
    /// EMA of reported directed occupancies, keyed (from, to) flat.
    pub ema_occupancy: BTreeMap<(u16, u16), f64>,
    pub trees: BTreeMap<TargetKey, TargetTree>,
    /// Terminals recently handed over out of this cluster; their exact
    /// entries keep pointing at the old satellite until expiry.
    pub lame_ducks: LameDuckMap,
}

impl ClusterRuntime {
    pub fn new(cluster: ClusterId) -> Self {
        Self {
            cluster,
            version: 0,
            ema_occupancy: BTreeMap::new(),
            trees: BTreeMap::new(),
            lame_ducks: BTreeMap::new(),
        }
    }
}

pub struct UpdateInputs<'a> {
    pub config: &'a ConstellationConfig,
    pub map: &'a ClusterMap,
    pub routing: &'a RoutingConfig,
    pub topology: &'a TopologySnapshot,
    /// Reports from members and monitored interface nodes, keyed by flat id.
    pub reports: &'a BTreeMap<u16, NodeStateReport>,
    pub summary: Rc<AreaSummary>,
    pub time_s: f64,
    /// Epoch counter used for redirect expiry.
    pub epoch: u64,
}

pub struct UpdateOutcome {
    pub tables: ClusterTables,
    pub signaling_messages: u64,
    pub signaling_packet_hops: u64,
    pub trees_recomputed: usize,
}

pub fn network_update(runtime: &mut ClusterRuntime, inp: &UpdateInputs) -> UpdateOutcome {
    let cid = runtime.cluster.0 as usize;
    let members = &inp.map.members[cid];
    let member_flats: Vec<u16> = members.iter().map(|s| s.flat(inp.config) as u16).collect();

    // Status scan: missing member report = failure; flags from the reports.
    let mut failed: BTreeSet<u16> = BTreeSet::new();
    let mut warned: BTreeSet<u16> = BTreeSet::new();
    for &flat in &member_flats {
        match inp.reports.get(&flat) {
            None => {
                failed.insert(flat);
            }
            Some(r) => {
                if r.shutdown_warning {
                    warned.insert(flat);
                }
            }
        }
    }
    let mut ring_flats: Vec<u16> = Vec::new();
    for dir in Direction::ALL {
        for b in &inp.map.boundary_links[cid][dir.index()] {
            ring_flats.push(b.outside.flat(inp.config) as u16);
        }
    }
    ring_flats.sort_unstable();
    ring_flats.dedup();
    let mut overloaded_ring: BTreeSet<u16> = BTreeSet::new();
    for &flat in &ring_flats {
        match inp.reports.get(&flat) {
            // A silent interface node is removed from the active set.
            None => {
                overloaded_ring.insert(flat);
            }
            Some(r) => {
                if r.node_overloaded || r.shutdown_warning {
                    overloaded_ring.insert(flat);
                }
            }
        }
    }

    // Fold fresh occupancies into the EMA.
    let w_new = inp.routing.ema_weight;
    for report in inp.reports.values() {
        for &(to, occ) in &report.isl_occupancy {
            runtime
                .ema_occupancy
                .entry((report.node_flat, to))
                .and_modify(|e| *e = (1.0 - w_new) * *e + w_new * occ)
                .or_insert(occ);
        }
    }

    let graph = build_cluster_graph(&GraphInputs {
        config: inp.config,
        map: inp.map,
        cluster: runtime.cluster,
        topology: inp.topology,
        routing: inp.routing,
        occupancy: &runtime.ema_occupancy,
        failed: &failed,
        warned: &warned,
        overloaded_ring: &overloaded_ring,
    });

    // Expire lame-duck attachments.
    runtime.lame_ducks.retain(|_, (_, expires)| *expires >= inp.epoch);

    // Wanted targets, in deterministic order. While the cluster is heated,
    // each direction salt exits through its own subset of the boundary,
    // spreading transit over parallel lanes; a cool cluster keeps all salts
    // on the plain min-hop tree.
    let salt_count = inp.routing.k_paths.clamp(1, 8) as u8;
    let mut wanted: Vec<(TargetKey, Vec<u16>)> = Vec::new();
    for dir in Direction::ALL {
        let roots: Vec<u16> = inp.map.boundary_links[cid][dir.index()]
            .iter()
            .map(|b| b.outside.flat(inp.config) as u16)
            .collect();
        if roots.is_empty() {
            continue;
        }
        for salt in 0..salt_count {
            let subset: Vec<u16> = if graph.heated {
                let picked: Vec<u16> = roots
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (*i as u8) % salt_count == salt)
                    .map(|(_, f)| *f)
                    .collect();
                if picked.is_empty() {
                    roots.clone()
                } else {
                    picked
                }
            } else {
                roots.clone()
            };
            wanted.push((
                TargetKey::Direction {
                    dir: dir.index() as u8,
                    salt,
                },
                subset,
            ));
        }
    }
    let mut attached_terminals: BTreeMap<TerminalAddress, u16> = BTreeMap::new();
    for report in inp.reports.values() {
        if failed.contains(&report.node_flat) {
            continue;
        }
        for &addr in &report.attached {
            attached_terminals.insert(addr, report.node_flat);
        }
    }
    // Fresh attachments win over lame ducks for the same address.
    for (&addr, &(root, _)) in &runtime.lame_ducks {
        attached_terminals.entry(addr).or_insert(root);
    }
    for (&addr, &root) in &attached_terminals {
        wanted.push((TargetKey::Terminal(addr), vec![root]));
    }

    // Tree maintenance. Trees are sticky: they move when a used link
    // disappears or blocks, plus a small budget of proactive moves for
    // trees whose bottleneck entered the ramp zone.
    let mut recomputed = 0usize;
    let mut fresh: BTreeMap<TargetKey, TargetTree> = BTreeMap::new();
    let mut return_budget = inp.routing.return_budget;
    let mut soft_budget = inp.routing.return_budget;
    for (key, roots) in &wanted {
        let root_idx: Vec<usize> = roots
            .iter()
            .filter_map(|f| graph.node_index(*f))
            .collect();
        if root_idx.is_empty() {
            continue;
        }
        let key_hash = target_hash(*key);
        let existing = runtime.trees.get(key);
        let mut reuse = existing.and_then(|tree| {
            (tree.root_flats == *roots && tree_valid(&graph, tree)).then(|| tree.clone())
        });
        if let Some(tree) = &reuse {
            let bottleneck = tree_bottleneck(&graph, tree);
            let fine_grained = matches!(key, TargetKey::Terminal(_));
            if fine_grained && tree.displaced && return_budget > 0 {
                // Re-optimization pass for displaced terminal trees, within
                // budget. Direction trees carry aggregated transit and stay
                // on their detour until a topology change rebuilds them;
                // moving them back wholesale re-creates the hotspot they
                // escaped.
                return_budget -= 1;
                let result = shortest_tree(&graph, &root_idx, inp.routing, key_hash, inp.routing.k_paths);
                if result.bottleneck < inp.routing.theta_return && !result.readmitted {
                    recomputed += 1;
                    reuse = Some(tree_from_result(&graph, roots, &result, inp.routing));
                }
            } else if bottleneck >= inp.routing.theta_warn && soft_budget > 0 {
                // Preemptive shedding before the drop threshold: adopt a
                // recomputed tree only when it is clearly cooler.
                soft_budget -= 1;
                let result = shortest_tree(&graph, &root_idx, inp.routing, key_hash, inp.routing.k_paths);
                if !result.readmitted && result.bottleneck + 0.25 < bottleneck {
                    recomputed += 1;
                    reuse = Some(tree_from_result(&graph, roots, &result, inp.routing));
                }
            }
        }
        let tree = match reuse {
            Some(t) => t,
            None => {
                recomputed += 1;
                let result = shortest_tree(&graph, &root_idx, inp.routing, key_hash, inp.routing.k_paths);
                tree_from_result(&graph, roots, &result, inp.routing)
            }
        };
        fresh.insert(*key, tree);
    }
    runtime.trees = fresh;

    // Per-node tables.
    let n_members = member_flats.len();
    let mut tables: Vec<NodeTable> = (0..n_members)
        .map(|_| NodeTable {
            exact: Vec::new(),
            direction_next: [
                vec![None; salt_count as usize],
                vec![None; salt_count as usize],
                vec![None; salt_count as usize],
                vec![None; salt_count as usize],
            ],
            member_next: Vec::new(),
        })
        .collect();
    for (key, tree) in &runtime.trees {
        match key {
            TargetKey::Direction { dir, salt } => {
                for mi in 0..n_members {
                    tables[mi].direction_next[*dir as usize][*salt as usize] = tree.next_hop[mi];
                }
            }
            TargetKey::Terminal(addr) => {
                let root = tree.root_flats[0];
                for (mi, &flat) in member_flats.iter().enumerate() {
                    let entry = if flat == root {
                        Some(ExactEntry::Downlink)
                    } else {
                        tree.next_hop[mi].map(ExactEntry::Via)
                    };
                    if let Some(e) = entry {
                        tables[mi].exact.push((*addr, e));
                    }
                }
                // Ring-rooted trees have no member root; the ring node's own
                // cluster installs the downlink entry.
            }
        }
    }
    for table in &mut tables {
        table.exact.sort_by_key(|(a, _)| *a);
        table.exact.dedup_by_key(|(a, _)| *a);
    }

    // Signaling accounting: reports up, instructions down, one exchange per
    // monitored interface node.
    let ctrl = inp.map.controller[cid];
    let mut packet_hops = 0u64;
    let mut messages = 0u64;
    for &member in members.iter() {
        if member == ctrl {
            continue;
        }
        let hops = inp.map.intra_hops(inp.config, member, ctrl) as u64;
        packet_hops += 2 * hops; // report + instruction
        messages += 2;
    }
    for dir in Direction::ALL {
        for b in &inp.map.boundary_links[cid][dir.index()] {
            let hops = 1 + inp.map.intra_hops(inp.config, b.inside, ctrl) as u64;
            packet_hops += hops;
            messages += 1;
        }
    }

    runtime.version += 1;
    UpdateOutcome {
        tables: ClusterTables {
            cluster: runtime.cluster,
            version: runtime.version,
            computed_at_s: inp.time_s,
            summary: Rc::clone(&inp.summary),
            node: tables,
        },
        signaling_messages: messages,
        signaling_packet_hops: packet_hops,
        trees_recomputed: recomputed,
    }
}

/// Record a handover away from this cluster: packets arriving on stale
/// remote state keep flowing to the old satellite, which delivers them over
/// the grace attachment until every controller has converged.
pub fn note_lame_duck(
    runtime: &mut ClusterRuntime,
    addr: TerminalAddress,
    old_sat_flat: u16,
    current_epoch: u64,
) {
    runtime.lame_ducks.insert(addr, (old_sat_flat, current_epoch + 2));
}

/// Current max occupancy over the tree's links.
fn tree_bottleneck(graph: &crate::routing::ClusterGraph, tree: &TargetTree) -> f64 {
    let mut worst = 0.0_f64;
    for (a, b) in &tree.used_links {
        let (Some(ai), Some(bi)) = (graph.node_index(*a), graph.node_index(*b)) else {
            continue;
        };
        if let Some(e) = graph.out[ai].iter().find(|e| e.to == bi) {
            worst = worst.max(e.occupancy);
        }
    }
    worst
}

fn tree_valid(graph: &crate::routing::ClusterGraph, tree: &TargetTree) -> bool {
    tree.used_links.iter().all(|(a, b)| {
        let Some(ai) = graph.node_index(*a) else {
            return false;
        };
        let Some(bi) = graph.node_index(*b) else {
            return false;
        };
        graph.out[ai]
            .iter()
            .any(|e| e.to == bi && e.weight.is_some())
    })
}

fn tree_from_result(
    graph: &crate::routing::ClusterGraph,
    roots: &[u16],
    result: &crate::routing::TreeResult,
    rcfg: &RoutingConfig,
) -> TargetTree {
    TargetTree {
        root_flats: roots.to_vec(),
        next_hop: (0..graph.n_members)
            .map(|mi| result.next[mi].map(|idx| graph.node_flats[idx]))
            .collect(),
        used_links: result.used_links.clone(),
        displaced: result.readmitted || result.bottleneck >= rcfg.theta_warn,
    }
}

fn target_hash(key: TargetKey) -> u64 {
    match key {
        TargetKey::Direction { dir, salt } => 0x1000 + 256 * dir as u64 + salt as u64,
        TargetKey::Terminal(addr) => 0x2000_0000 + addr.0 as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::build_cluster_map;
    use crate::geoaddr::AreaId;
    use crate::orbit::SatId;
    use crate::topology::build_topology;

    fn base_reports(
        config: &ConstellationConfig,
        map: &ClusterMap,
        cluster: ClusterId,
        topo: &TopologySnapshot,
    ) -> BTreeMap<u16, NodeStateReport> {
        let mut reports = BTreeMap::new();
        let cid = cluster.0 as usize;
        let mut nodes: Vec<u16> = map.members[cid]
            .iter()
            .map(|s| s.flat(config) as u16)
            .collect();
        for dir in Direction::ALL {
            for b in &map.boundary_links[cid][dir.index()] {
                nodes.push(b.outside.flat(config) as u16);
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        for flat in nodes {
            let isl = topo.adjacency[flat as usize]
                .iter()
                .map(|&(nb, _)| (nb as u16, 0.0))
                .collect();
            reports.insert(
                flat,
                NodeStateReport {
                    node_flat: flat,
                    time_s: 0.0,
                    isl_occupancy: isl,
                    node_overloaded: false,
                    shutdown_warning: false,
                    attached: vec![],
                },
            );
        }
        reports
    }

    fn run_update(
        runtime: &mut ClusterRuntime,
        config: &ConstellationConfig,
        map: &ClusterMap,
        topo: &TopologySnapshot,
        reports: &BTreeMap<u16, NodeStateReport>,
    ) -> UpdateOutcome {
        let rcfg = RoutingConfig::default();
        network_update(
            runtime,
            &UpdateInputs {
                config,
                map,
                routing: &rcfg,
                topology: topo,
                reports,
                summary: Rc::new(AreaSummary::default()),
                time_s: 0.0,
                epoch: 1,
            },
        )
    }

    #[test]
    fn zero_load_direction_trees_are_min_hop() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let reports = base_reports(&config, &map, cluster, &topo);
        let mut runtime = ClusterRuntime::new(cluster);
        let out = run_update(&mut runtime, &config, &map, &topo, &reports);
        // Every member has an east exit whose hop count equals the grid
        // distance to the east boundary.
        let cid = cluster.0 as usize;
        let plane_hi = map.members[cid].iter().map(|s| s.plane).max().unwrap();
        for (mi, member) in map.members[cid].iter().enumerate() {
            let next = out.tables.node[mi].direction_next[Direction::East.index()][0];
            if member.plane == plane_hi {
                // One boundary hop away: next is the interface node itself.
                let nf = next.expect("east exit");
                let nsat = SatId::from_flat(&config, nf as usize);
                assert_eq!(nsat.plane, plane_hi + 1);
            } else {
                assert!(next.is_some());
            }
        }
    }

    #[test]
    fn attached_terminal_gets_exact_entries_everywhere() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let mut reports = base_reports(&config, &map, cluster, &topo);
        let serving = map.members[7][10];
        let addr = TerminalAddress::new(AreaId(3540), 5);
        reports
            .get_mut(&(serving.flat(&config) as u16))
            .unwrap()
            .attached
            .push(addr);
        let mut runtime = ClusterRuntime::new(cluster);
        let out = run_update(&mut runtime, &config, &map, &topo, &reports);
        for (mi, member) in map.members[7].iter().enumerate() {
            let entry = out.tables.node[mi].lookup_exact(addr).expect("entry");
            if *member == serving {
                assert_eq!(entry, ExactEntry::Downlink);
            } else {
                match entry {
                    ExactEntry::Via(next) => {
                        // The next hop is strictly closer to the serving sat.
                        let next_sat = SatId::from_flat(&config, next as usize);
                        assert!(
                            map.intra_hops(&config, next_sat, serving)
                                < map.intra_hops(&config, *member, serving)
                                || map.cluster_of(&config, next_sat) == cluster
                        );
                    }
                    other => panic!("unexpected entry {other:?}"),
                }
            }
        }
    }

    #[test]
    fn missing_report_excludes_node_from_all_trees() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let mut reports = base_reports(&config, &map, cluster, &topo);
        let dead = map.members[7][20];
        let dead_flat = dead.flat(&config) as u16;
        reports.remove(&dead_flat);
        let mut runtime = ClusterRuntime::new(cluster);
        let _ = run_update(&mut runtime, &config, &map, &topo, &reports);
        for tree in runtime.trees.values() {
            for (a, b) in &tree.used_links {
                assert_ne!(*a, dead_flat, "tree routes out of a failed node");
                assert_ne!(*b, dead_flat, "tree routes into a failed node");
            }
        }
    }

    #[test]
    fn overloaded_interface_node_shifts_exit() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let cid = cluster.0 as usize;
        let mut reports = base_reports(&config, &map, cluster, &topo);
        // Overload the east interface node adjacent to a chosen member.
        let probe = map.members[cid]
            .iter()
            .copied()
            .find(|s| {
                map.boundary_links[cid][Direction::East.index()]
                    .iter()
                    .any(|b| b.inside == *s)
            })
            .unwrap();
        let iface = map.boundary_links[cid][Direction::East.index()]
            .iter()
            .find(|b| b.inside == probe)
            .unwrap()
            .outside;
        reports
            .get_mut(&(iface.flat(&config) as u16))
            .unwrap()
            .node_overloaded = true;

        let mut runtime = ClusterRuntime::new(cluster);
        let out = run_update(&mut runtime, &config, &map, &topo, &reports);
        let mi = map.members[cid].iter().position(|s| *s == probe).unwrap();
        for salt in 0..4 {
            let next = out.tables.node[mi].direction_next[Direction::East.index()][salt]
                .expect("east exit still available");
            assert_ne!(
                next,
                iface.flat(&config) as u16,
                "route still exits via the overloaded interface node"
            );
        }
    }

    #[test]
    fn trees_are_sticky_until_blocked() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let reports = base_reports(&config, &map, cluster, &topo);
        let mut runtime = ClusterRuntime::new(cluster);
        let first = run_update(&mut runtime, &config, &map, &topo, &reports);
        let recomputed_first = first.trees_recomputed;
        assert!(recomputed_first > 0);
        // Second identical epoch: nothing moves.
        let second = run_update(&mut runtime, &config, &map, &topo, &reports);
        assert_eq!(second.trees_recomputed, 0);
        // Moderate occupancy below the block threshold: still sticky.
        let mut warm = reports.clone();
        for r in warm.values_mut() {
            for (_, occ) in r.isl_occupancy.iter_mut() {
                *occ = 0.7;
            }
        }
        let third = run_update(&mut runtime, &config, &map, &topo, &warm);
        assert_eq!(third.trees_recomputed, 0);
    }

    #[test]
    fn signaling_accounting_matches_model_shape() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        // Interior cluster: 2*(n_c - 1) member messages + 28 interface ones.
        let cluster = map
            .seam_adjacent
            .iter()
            .position(|s| !*s)
            .map(|i| ClusterId(i as u8))
            .unwrap();
        let reports = base_reports(&config, &map, cluster, &topo);
        let mut runtime = ClusterRuntime::new(cluster);
        let out = run_update(&mut runtime, &config, &map, &topo, &reports);
        assert_eq!(out.signaling_messages, 2 * 47 + 28);
        // Packet-hops equal the closed-form per-cluster terms.
        let h_c = crate::cluster::avg_hops_to_controller(&map, &config, cluster);
        let h_int = crate::cluster::avg_interface_hops(&map, &config, cluster);
        let expect = 2.0 * h_c * 47.0 + h_int * 28.0;
        assert!((out.signaling_packet_hops as f64 - expect).abs() < 1e-9);
    }

    #[test]
    fn lame_duck_entries_point_at_old_sat_and_expire() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let topo = build_topology(&config, 0.0);
        let cluster = ClusterId(7);
        let reports = base_reports(&config, &map, cluster, &topo);
        let mut runtime = ClusterRuntime::new(cluster);
        let addr = TerminalAddress::new(AreaId(100), 3);
        let old_sat = map.members[7][5];
        note_lame_duck(&mut runtime, addr, old_sat.flat(&config) as u16, 1);
        let out = run_update(&mut runtime, &config, &map, &topo, &reports);
        let mi = map.members[7].iter().position(|s| *s == old_sat).unwrap();
        assert_eq!(
            out.tables.node[mi].lookup_exact(addr),
            Some(ExactEntry::Downlink)
        );
        assert!(matches!(
            out.tables.node[0].lookup_exact(addr),
            Some(ExactEntry::Via(_))
        ));
        // Expired after two epochs.
        let rcfg = RoutingConfig::default();
        let late = network_update(
            &mut runtime,
            &UpdateInputs {
                config: &config,
                map: &map,
                routing: &rcfg,
                topology: &topo,
                reports: &reports,
                summary: Rc::new(AreaSummary::default()),
                time_s: 10.0,
                epoch: 5,
            },
        );
        assert_eq!(late.tables.node[0].lookup_exact(addr), None);
    }
}
