//! Small undirected graph with hop-count routing helpers.
//!
//! Every tie is broken toward the lowest vertex id, so routes composed from
//! [`Graph::next_hops_toward`] are the lexicographically smallest shortest
//! paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::kernel::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph<N: Ord + Copy = NodeId> {
    adj: BTreeMap<N, BTreeSet<N>>,
}

impl<N: Ord + Copy> Default for Graph<N> {
    fn default() -> Self {
        Graph {
            adj: BTreeMap::new(),
        }
    }
}

impl<N: Ord + Copy> Graph<N> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, n: N) {
        self.adj.entry(n).or_default();
    }

    pub fn add_edge(&mut self, a: N, b: N) {
        if a == b {
            return;
        }
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn remove_edge(&mut self, a: N, b: N) {
        if let Some(s) = self.adj.get_mut(&a) {
            s.remove(&b);
        }
        if let Some(s) = self.adj.get_mut(&b) {
            s.remove(&a);
        }
    }

    pub fn has_edge(&self, a: N, b: N) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn contains(&self, n: N) -> bool {
        self.adj.contains_key(&n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = N> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (N, N)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, s)| s.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn neighbors(&self, n: N) -> impl Iterator<Item = N> + '_ {
        self.adj.get(&n).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, n: N) -> usize {
        self.adj.get(&n).map_or(0, |s| s.len())
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<N>) -> Graph<N> {
        let mut g = Graph::new();
        for &n in keep {
            if self.contains(n) {
                g.add_node(n);
            }
        }
        for (a, b) in self.edges() {
            if keep.contains(&a) && keep.contains(&b) {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Hop distances from any vertex in `sources`.
    pub fn bfs_from_set(&self, sources: &BTreeSet<N>) -> BTreeMap<N, u32> {
        let mut dist = BTreeMap::new();
        let mut q = VecDeque::new();
        for &s in sources {
            if self.contains(s) {
                dist.insert(s, 0);
                q.push_back(s);
            }
        }
        while let Some(u) = q.pop_front() {
            let du = dist[&u];
            for v in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(du + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn bfs(&self, src: N) -> BTreeMap<N, u32> {
        self.bfs_from_set(&BTreeSet::from([src]))
    }

    /// Next hop toward the nearest member of `targets` for every vertex that
    /// can reach one (targets themselves are omitted).
    pub fn next_hops_toward_set(&self, targets: &BTreeSet<N>) -> BTreeMap<N, N> {
        let dist = self.bfs_from_set(targets);
        let mut hops = BTreeMap::new();
        for (&u, &du) in &dist {
            if du == 0 {
                continue;
            }
            let nh = self.neighbors(u).find(|v| dist.get(v) == Some(&(du - 1)));
            hops.insert(u, nh.expect("bfs parent exists"));
        }
        hops
    }

    pub fn next_hops_toward(&self, dst: N) -> BTreeMap<N, N> {
        self.next_hops_toward_set(&BTreeSet::from([dst]))
    }

    pub fn shortest_path(&self, src: N, dst: N) -> Option<Vec<N>> {
        if src == dst {
            return self.contains(src).then(|| vec![src]);
        }
        let hops = self.next_hops_toward(dst);
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            cur = *hops.get(&cur)?;
            path.push(cur);
        }
        Some(path)
    }

    pub fn components(&self) -> Vec<BTreeSet<N>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for n in self.nodes() {
            if seen.contains(&n) {
                continue;
            }
            let comp: BTreeSet<N> = self.bfs(n).into_keys().collect();
            seen.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(u32, u32)]) -> Graph {
        let mut g = Graph::new();
        for &(a, b) in edges {
            g.add_edge(NodeId(a), NodeId(b));
        }
        g
    }

    #[test]
    fn lowest_id_tie_break() {
        // square 1-2-4-3-1: two shortest paths from 1 to 4
        let g = g(&[(1, 2), (2, 4), (4, 3), (3, 1)]);
        assert_eq!(
            g.shortest_path(NodeId(1), NodeId(4)).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(4)]
        );
    }

    #[test]
    fn unreachable_has_no_path() {
        let mut g = g(&[(1, 2)]);
        g.add_node(NodeId(3));
        assert!(g.shortest_path(NodeId(1), NodeId(3)).is_none());
        assert_eq!(g.components().len(), 2);
    }

    #[test]
    fn nearest_of_set() {
        let g = g(&[(1, 2), (2, 3), (3, 4), (4, 5)]);
        let hops = g.next_hops_toward_set(&BTreeSet::from([NodeId(1), NodeId(5)]));
        assert_eq!(hops[&NodeId(2)], NodeId(1));
        assert_eq!(hops[&NodeId(4)], NodeId(5));
        assert_eq!(hops[&NodeId(3)], NodeId(2));
    }
}
