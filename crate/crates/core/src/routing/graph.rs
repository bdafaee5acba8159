//! Weighted cluster graph and deterministic shortest trees.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet};

use crate::cluster::{ClusterId, ClusterMap, Direction};
use crate::orbit::ConstellationConfig;
use crate::routing::{link_weight, readmission_weight, RoutingConfig};
use crate::topology::{LinkKind, TopologySnapshot};

#[derive(Debug, Clone, Copy)]
pub struct GraphEdge {
    pub to: usize,
    /// `None`: excluded by occupancy or interface overload, readmittable.
    pub weight: Option<f64>,
    pub occupancy: f64,
}

/// Directed routing graph of one cluster: its members plus the monitored
/// interface ring. Hard-excluded links (inactive, failed node, warned
/// inter-plane) are absent entirely.
#[derive(Debug, Clone)]
pub struct ClusterGraph {
    /// Flat ids: members first (sorted), then ring nodes (sorted).
    pub node_flats: Vec<u16>,
    pub n_members: usize,
    pub index: BTreeMap<u16, usize>,
    pub out: Vec<Vec<GraphEdge>>,
    /// Some edge was excluded for occupancy when the graph was built.
    pub had_occupancy_exclusions: bool,
    /// Some edge weight is above 1 (the ramp is active somewhere).
    pub heated: bool,
}

impl ClusterGraph {
    pub fn node_index(&self, flat: u16) -> Option<usize> {
        self.index.get(&flat).copied()
    }
}

pub struct GraphInputs<'a> {
    pub config: &'a ConstellationConfig,
    pub map: &'a ClusterMap,
    pub cluster: ClusterId,
    pub topology: &'a TopologySnapshot,
    pub routing: &'a RoutingConfig,
    /// Controller-side EMA of directed occupancies, keyed (from, to) flat.
    pub occupancy: &'a BTreeMap<(u16, u16), f64>,
    /// Members with no report this epoch.
    pub failed: &'a BTreeSet<u16>,
    /// Nodes flagged with an inter-plane shutdown warning.
    pub warned: &'a BTreeSet<u16>,
    /// Monitored interface nodes reporting overload.
    pub overloaded_ring: &'a BTreeSet<u16>,
}

pub fn build_cluster_graph(inp: &GraphInputs) -> ClusterGraph {
    let cid = inp.cluster.0 as usize;
    let members = &inp.map.members[cid];
    let mut node_flats: Vec<u16> = members
        .iter()
        .map(|s| s.flat(inp.config) as u16)
        .collect();
    let n_members = node_flats.len();
    let mut ring: Vec<u16> = Vec::new();
    for dir in Direction::ALL {
        for b in &inp.map.boundary_links[cid][dir.index()] {
            ring.push(b.outside.flat(inp.config) as u16);
        }
    }
    ring.sort_unstable();
    ring.dedup();
    node_flats.extend(&ring);

    let index: BTreeMap<u16, usize> = node_flats
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, i))
        .collect();

    let mut out = vec![Vec::new(); node_flats.len()];
    let mut had_excl = false;
    let mut heated = false;
    let occ_of = |from: u16, to: u16| -> f64 {
        inp.occupancy.get(&(from, to)).copied().unwrap_or(0.0)
    };

    for (mi, &member) in members.iter().enumerate() {
        let from_flat = node_flats[mi];
        if inp.failed.contains(&from_flat) {
            continue;
        }
        for &(nb, link_idx) in &inp.topology.adjacency[member.flat(inp.config)] {
            let nb_flat = nb as u16;
            let Some(&to_idx) = index.get(&nb_flat) else {
                continue; // outside the cluster scope
            };
            let link = &inp.topology.links[link_idx];
            if inp.failed.contains(&nb_flat) {
                continue;
            }
            if link.kind == LinkKind::InterPlane
                && (inp.warned.contains(&from_flat) || inp.warned.contains(&nb_flat))
            {
                continue;
            }
            let occ = occ_of(from_flat, nb_flat);
            let ring_overload = to_idx >= n_members && inp.overloaded_ring.contains(&nb_flat);
            let weight = link_weight(inp.routing, occ, ring_overload);
            match weight {
                None => had_excl = true,
                Some(w) if w > 1.0 => heated = true,
                _ => {}
            }
            out[mi].push(GraphEdge {
                to: to_idx,
                weight,
                occupancy: occ,
            });
        }
        out[mi].sort_by_key(|e| e.to);
    }

    ClusterGraph {
        node_flats,
        n_members,
        index,
        out,
        had_occupancy_exclusions: had_excl,
        heated: heated || had_excl,
    }
}

#[derive(Debug, Clone)]
pub struct TreeResult {
    /// Weighted distance to the nearest root, per node index.
    pub dist: Vec<f64>,
    /// Next hop (node index) toward the root set.
    pub next: Vec<Option<usize>>,
    /// Directed member-level links used, as (from flat, to flat).
    pub used_links: Vec<(u16, u16)>,
    /// Max occupancy over used links.
    pub bottleneck: f64,
    /// Blocked links were readmitted to restore reachability.
    pub readmitted: bool,
}

/// Deterministic multi-root shortest tree toward `roots`.
///
/// Distances are computed toward the root set on the directed graph; the
/// per-node next hop is then chosen among the equal-cost candidates (capped
/// at `k_cap`, sorted by flat id) with a stable per-target hash, spreading
/// parallel routes across the min-cost DAG. If members are cut off by
/// occupancy exclusions, the blocked edges are readmitted at penalty weights
/// ascending in occupancy.
pub fn shortest_tree(graph: &ClusterGraph, roots: &[usize], rcfg: &RoutingConfig, key_hash: u64, k_cap: usize) -> TreeResult {
    let attempt = run_dijkstra(graph, roots, rcfg, false);
    let members_reachable = (0..graph.n_members).all(|i| attempt.0[i].is_finite());
    let (dist, readmitted) = if members_reachable {
        (attempt.0, false)
    } else {
        (run_dijkstra(graph, roots, rcfg, true).0, true)
    };

    let k_cap = k_cap.max(1);
    let mut next = vec![None; graph.node_flats.len()];
    let mut used = Vec::new();
    let mut bottleneck = 0.0_f64;
    for u in 0..graph.n_members {
        if roots.contains(&u) || !dist[u].is_finite() {
            continue;
        }
        let mut candidates: Vec<(usize, f64)> = graph.out[u]
            .iter()
            .filter_map(|e| {
                let w = effective_weight(e, rcfg, readmitted)?;
                (w + dist[e.to] == dist[u]).then_some((e.to, e.occupancy))
            })
            .collect();
        if candidates.is_empty() {
            // Float sums may differ across relaxation orders; fall back to
            // the minimizing edge.
            candidates = graph.out[u]
                .iter()
                .filter_map(|e| {
                    let w = effective_weight(e, rcfg, readmitted)?;
                    dist[e.to].is_finite().then_some((e.to, e.occupancy, w + dist[e.to]))
                })
                .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
                .map(|(to, occ, _)| (to, occ))
                .into_iter()
                .collect();
        }
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_by_key(|(to, _)| graph.node_flats[*to]);
        candidates.truncate(k_cap);
        let pick = (mix(key_hash, u as u64) % candidates.len() as u64) as usize;
        let (to, occ) = candidates[pick];
        next[u] = Some(to);
        used.push((graph.node_flats[u], graph.node_flats[to]));
        bottleneck = bottleneck.max(occ);
    }

    TreeResult {
        dist,
        next,
        used_links: used,
        bottleneck,
        readmitted,
    }
}

fn effective_weight(e: &GraphEdge, rcfg: &RoutingConfig, readmit: bool) -> Option<f64> {
    match e.weight {
        Some(w) => Some(w),
        None if readmit => Some(readmission_weight(rcfg, e.occupancy)),
        None => None,
    }
}

fn run_dijkstra(
    graph: &ClusterGraph,
    roots: &[usize],
    rcfg: &RoutingConfig,
    readmit: bool,
) -> (Vec<f64>, ()) {
    let n = graph.node_flats.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for &r in roots {
        dist[r] = 0.0;
        heap.push(Reverse((0, r)));
    }
    // Relax along reversed edges: dist[u] is the cost of u -> ... -> root,
    // so an edge u -> v relaxes u from v.
    let mut in_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (u, edges) in graph.out.iter().enumerate() {
        for e in edges {
            if let Some(w) = effective_weight(e, rcfg, readmit) {
                in_edges[e.to].push((u, w));
            }
        }
    }
    while let Some(Reverse((dbits, v))) = heap.pop() {
        if f64::from_bits(dbits) > dist[v] {
            continue;
        }
        for &(u, w) in &in_edges[v] {
            let cand = dist[v] + w;
            if cand < dist[u] {
                dist[u] = cand;
                heap.push(Reverse((cand.to_bits(), u)));
            }
        }
    }
    (dist, ())
}

fn mix(a: u64, b: u64) -> u64 {
    let mut x = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x
}
