//! Yen's K-shortest loop-free paths over a label-setting Dijkstra.
//!
//! Paths are totally ordered by `(length_km, hops, node sequence)`. The
//! order is preserved under appending a link to paths with the same end
//! node, so Dijkstra returns the unique minimum under it and Yen's
//! enumeration yields a deterministic, prefix-stable ranking.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::{LinkId, NodeId, Path, Topology};

#[derive(Clone, Debug)]
struct Label {
    length: f64,
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
}

impl Label {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.links.len().cmp(&other.links.len()))
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

// Min-heap adaptor.
struct Queued(Label);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.0.key_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key_cmp(&self.0)
    }
}

pub(super) fn path_cmp(a: &Path, b: &Path) -> Ordering {
    a.length_km
        .total_cmp(&b.length_km)
        .then(a.hops().cmp(&b.hops()))
        .then_with(|| a.nodes.cmp(&b.nodes))
}

fn restricted_shortest(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    banned_nodes: &BTreeSet<NodeId>,
    banned_links: &BTreeSet<LinkId>,
) -> Option<Label> {
    let mut settled = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    heap.push(Queued(Label { length: 0.0, nodes: vec![src], links: Vec::new() }));
    while let Some(Queued(label)) = heap.pop() {
        let at = *label.nodes.last().unwrap();
        if !settled.insert(at) {
            continue;
        }
        if at == dst {
            return Some(label);
        }
        for &(next, link) in topo.neighbors(at) {
            if settled.contains(&next) || banned_nodes.contains(&next) || banned_links.contains(&link) {
                continue;
            }
            if label.nodes.contains(&next) {
                continue;
            }
            let mut nodes = label.nodes.clone();
            nodes.push(next);
            let mut links = label.links.clone();
            links.push(link);
            heap.push(Queued(Label { length: label.length + topo.link(link).length_km, nodes, links }));
        }
    }
    None
}

/// Shortest path under the `(length, hops, node sequence)` order, i.e. the
/// first entry of [`k_shortest_paths`].
pub fn shortest_path(topo: &Topology, s: NodeId, d: NodeId) -> Option<Path> {
    if s == d || !topo.contains(s) || !topo.contains(d) {
        return None;
    }
    restricted_shortest(topo, s, d, &BTreeSet::new(), &BTreeSet::new())
        .and_then(|l| Path::from_nodes(topo, &l.nodes))
}

/// Up to `k` loop-free paths from `s` to `d`, ascending by length, then hop
/// count, then node sequence. Returns an empty list when `s == d`, either
/// endpoint is unknown, or no path exists.
pub fn k_shortest_paths(topo: &Topology, s: NodeId, d: NodeId, k: usize) -> Vec<Path> {
    let mut accepted: Vec<Path> = Vec::new();
    if k == 0 {
        return accepted;
    }
    match shortest_path(topo, s, d) {
        Some(p) => accepted.push(p),
        None => return accepted,
    }
    let mut candidates: Vec<Path> = Vec::new();
    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for i in 0..prev.hops() {
            let spur = prev.nodes[i];
            let root = &prev.nodes[..=i];
            let banned_links: BTreeSet<LinkId> = accepted
                .iter()
                .filter(|p| p.nodes.len() > i + 1 && &p.nodes[..=i] == root)
                .map(|p| p.links[i])
                .collect();
            let banned_nodes: BTreeSet<NodeId> = root[..i].iter().copied().collect();
            let Some(spur_path) = restricted_shortest(topo, spur, d, &banned_nodes, &banned_links) else {
                continue;
            };
            let mut nodes = root[..i].to_vec();
            nodes.extend_from_slice(&spur_path.nodes);
            let Some(candidate) = Path::from_nodes(topo, &nodes) else {
                continue;
            };
            if !accepted.contains(&candidate) && !candidates.contains(&candidate) {
                candidates.push(candidate);
            }
        }
        let Some(best) = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| path_cmp(a.1, b.1))
            .map(|(i, _)| i)
        else {
            break;
        };
        accepted.push(candidates.swap_remove(best));
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologySpec;

    fn topo(nodes: &[u32], links: &[(u32, u32, f64)]) -> Topology {
        Topology::from_spec(&TopologySpec {
            name: None,
            nodes: nodes.to_vec(),
            links: links.to_vec(),
            slot_capacity: 10,
            dc_nodes: vec![],
        })
        .unwrap()
    }

    #[test]
    fn single_link_has_one_path() {
        let t = topo(&[1, 2], &[(1, 2, 1200.0)]);
        let ps = k_shortest_paths(&t, NodeId(1), NodeId(2), 3);
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].hops(), 1);
    }

    #[test]
    fn triangle_orders_direct_first() {
        let t = topo(&[1, 2, 3], &[(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]);
        let ps = k_shortest_paths(&t, NodeId(1), NodeId(2), 3);
        let seqs: Vec<Vec<u32>> = ps.iter().map(|p| p.nodes().iter().map(|n| n.0).collect()).collect();
        assert_eq!(seqs, vec![vec![1, 2], vec![1, 3, 2]]);
    }

    #[test]
    fn ties_break_on_hops_then_sequence() {
        // 1-4 direct is 2.0, 1-2-4 and 1-3-4 are 2.0 with two hops each.
        let t = topo(&[1, 2, 3, 4], &[(1, 4, 2.0), (1, 2, 1.0), (2, 4, 1.0), (1, 3, 1.0), (3, 4, 1.0)]);
        let ps = k_shortest_paths(&t, NodeId(1), NodeId(4), 3);
        let seqs: Vec<Vec<u32>> = ps.iter().map(|p| p.nodes().iter().map(|n| n.0).collect()).collect();
        assert_eq!(seqs, vec![vec![1, 4], vec![1, 2, 4], vec![1, 3, 4]]);
    }

    #[test]
    fn degenerate_requests_are_empty() {
        let t = topo(&[1, 2], &[(1, 2, 1.0)]);
        assert!(k_shortest_paths(&t, NodeId(1), NodeId(1), 2).is_empty());
        assert!(k_shortest_paths(&t, NodeId(1), NodeId(9), 2).is_empty());
        assert!(k_shortest_paths(&t, NodeId(1), NodeId(2), 0).is_empty());
    }
}
