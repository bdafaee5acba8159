//! Source-routed shortest-path benchmark.
//!
//! Min-hop routes on the full active graph, ignoring link loads; ties break
//! to the lexicographically smallest node sequence. Like the cluster scheme,
//! path computation avoids inter-plane links of satellites about to enter
//! the shutdown latitudes.

use std::collections::VecDeque;

use crate::orbit::ConstellationConfig;
use crate::topology::{LinkKind, TopologySnapshot};

/// Undirected hop graph for source routing.
#[derive(Debug, Clone)]
pub struct SspfGraph {
    pub adjacency: Vec<Vec<u16>>,
}

/// Active links, minus inter-plane links of shutdown-warned satellites.
pub fn build_sspf_graph(
    config: &ConstellationConfig,
    topology: &TopologySnapshot,
    warned: &[bool],
) -> SspfGraph {
    let n = config.num_sats();
    let mut adjacency = vec![Vec::with_capacity(4); n];
    for link in topology.links.iter().filter(|l| l.active) {
        let af = link.id.a.flat(config);
        let bf = link.id.b.flat(config);
        if link.kind == LinkKind::InterPlane && (warned[af] || warned[bf]) {
            continue;
        }
        adjacency[af].push(bf as u16);
        adjacency[bf].push(af as u16);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    SspfGraph { adjacency }
}

/// Hop distances from `from` to every node (`u32::MAX` if unreachable).
pub fn bfs_dist(graph: &SspfGraph, from: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; graph.adjacency.len()];
    dist[from] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for &v in &graph.adjacency[u] {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = dist[u] + 1;
                queue.push_back(v as usize);
            }
        }
    }
    dist
}

/// Lexicographically smallest min-hop route from `src` to `dst`, inclusive
/// of both endpoints. `None` when disconnected.
pub fn min_hop_route(graph: &SspfGraph, src: usize, dst: usize) -> Option<Vec<u16>> {
    if src == dst {
        return Some(vec![src as u16]);
    }
    let dist = bfs_dist(graph, dst);
    if dist[src] == u32::MAX {
        return None;
    }
    let mut route = Vec::with_capacity(dist[src] as usize + 1);
    route.push(src as u16);
    let mut cur = src;
    while cur != dst {
        // Adjacency is sorted: the first neighbor one step closer gives the
        // lexicographically smallest sequence.
        let next = *graph.adjacency[cur]
            .iter()
            .find(|&&v| dist[v as usize] == dist[cur] - 1)
            .expect("distance decreases along some neighbor");
        route.push(next);
        cur = next as usize;
    }
    Some(route)
}

/// True while every inner link of the route is still present in the graph.
pub fn route_valid(graph: &SspfGraph, route: &[u16]) -> bool {
    route
        .windows(2)
        .all(|w| graph.adjacency[w[0] as usize].binary_search(&w[1]).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::SatId;
    use crate::topology::build_topology;

    fn graph_at(t: f64) -> (ConstellationConfig, SspfGraph) {
        let c = ConstellationConfig::default();
        let topo = build_topology(&c, t);
        let warned = vec![false; c.num_sats()];
        (c.clone(), build_sspf_graph(&c, &topo, &warned))
    }

    #[test]
    fn trivial_routes() {
        let (_c, g) = graph_at(0.0);
        assert_eq!(min_hop_route(&g, 5, 5), Some(vec![5]));
        // Adjacent nodes: a single hop.
        let r = min_hop_route(&g, 0, 1).unwrap();
        assert_eq!(r, vec![0, 1]);
    }

    #[test]
    fn hop_counts_match_bfs_oracle_for_random_pairs() {
        let (c, g) = graph_at(321.0);
        // Deterministic pseudo-random pairs.
        let mut state = 0x1234_5678_9abc_def0_u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as usize % c.num_sats()
        };
        for _ in 0..100 {
            let src = next();
            let dst = next();
            let route = min_hop_route(&g, src, dst).expect("connected");
            // Independent oracle: plain BFS from the source.
            let oracle = bfs_dist(&g, src);
            assert_eq!(route.len() as u32 - 1, oracle[dst], "{src}->{dst}");
            // Consecutive nodes adjacent, no repeats.
            let mut seen = std::collections::BTreeSet::new();
            for w in route.windows(2) {
                assert!(g.adjacency[w[0] as usize].binary_search(&w[1]).is_ok());
            }
            for n in &route {
                assert!(seen.insert(*n), "repeated node in route");
            }
        }
    }

    #[test]
    fn lexicographic_tie_break() {
        let (_c, g) = graph_at(0.0);
        let route = min_hop_route(&g, 100, 150).unwrap();
        // Any other min-hop route compares lexicographically greater or equal.
        // Spot check: recompute and verify the first divergence picks the
        // smaller node id.
        let dist = bfs_dist(&g, 150);
        let mut cur = 100usize;
        for &step in route.iter().skip(1) {
            let candidates: Vec<u16> = g.adjacency[cur]
                .iter()
                .copied()
                .filter(|&v| dist[v as usize] == dist[cur] - 1)
                .collect();
            assert_eq!(step, candidates[0]);
            cur = step as usize;
        }
    }

    #[test]
    fn warned_satellites_lose_inter_plane_edges() {
        let c = ConstellationConfig::default();
        let topo = build_topology(&c, 0.0);
        let mut warned = vec![false; c.num_sats()];
        let sat = SatId::new(10, 5);
        warned[sat.flat(&c)] = true;
        let g = build_sspf_graph(&c, &topo, &warned);
        for &nb in &g.adjacency[sat.flat(&c)] {
            let nb_sat = SatId::from_flat(&c, nb as usize);
            assert_eq!(nb_sat.plane, sat.plane, "inter-plane edge survived");
        }
    }
}
