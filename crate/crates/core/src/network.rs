//! Attributed graph with dense integer node ids.
//!
//! Influence always flows along in-edges: for a directed edge `(u, v)` the
//! node `u` is a neighbor of `v`. Undirected graphs store both directions,
//! so the same lookup serves both modes.

use std::fmt;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    in_adj: Vec<Vec<NodeId>>,
    directed: bool,
    features: Vec<Vec<f64>>,
    feature_dim: usize,
}

impl Graph {
    /// Builds a graph from an edge list.
    ///
    /// The node count is the number of feature rows when features are given,
    /// otherwise `max id + 1`. Duplicate edges collapse and self-loops are
    /// dropped. Undirected input is symmetrized.
    pub fn from_edge_list(
        edges: &[(NodeId, NodeId)],
        directed: bool,
        features: Option<Vec<Vec<f64>>>,
    ) -> Result<Graph> {
        let max_id = edges.iter().map(|&(u, v)| u.max(v)).max();
        let needed = max_id.map_or(0, |m| m + 1);
        let node_count = match &features {
            Some(rows) => {
                if rows.len() < needed {
                    return Err(Error::format(
                        None,
                        format!(
                            "attribute matrix has {} rows but edge list references node {}",
                            rows.len(),
                            needed - 1
                        ),
                    ));
                }
                rows.len()
            }
            None => needed,
        };
        Self::with_edges(node_count, edges.iter().copied(), directed, features)
    }

    /// Builds a graph on exactly `node_count` nodes.
    pub fn with_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        directed: bool,
        features: Option<Vec<Vec<f64>>>,
    ) -> Result<Graph> {
        let features = features.unwrap_or_else(|| vec![Vec::new(); node_count]);
        if features.len() != node_count {
            return Err(Error::format(
                None,
                format!("expected {node_count} feature rows, got {}", features.len()),
            ));
        }
        let feature_dim = features.first().map_or(0, Vec::len);
        if let Some(i) = features.iter().position(|row| row.len() != feature_dim) {
            return Err(Error::format(
                None,
                format!("feature row {i} has length {}, expected {feature_dim}", features[i].len()),
            ));
        }

        let mut in_adj = vec![Vec::new(); node_count];
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::arg(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                continue;
            }
            in_adj[v].push(u);
            if !directed {
                in_adj[u].push(v);
            }
        }
        for list in &mut in_adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { in_adj, directed, features, feature_dim })
    }

    pub fn node_count(&self) -> usize {
        self.in_adj.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Number of edges; undirected edges count once.
    pub fn edge_count(&self) -> usize {
        let stored: usize = self.in_adj.iter().map(Vec::len).sum();
        if self.directed {
            stored
        } else {
            stored / 2
        }
    }

    /// In-neighbors of `v` in ascending id order.
    pub fn neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check_node(v)?;
        Ok(&self.in_adj[v])
    }

    pub fn degree(&self, v: NodeId) -> Result<usize> {
        Ok(self.neighbors(v)?.len())
    }

    /// Degree-centrality weight `1 / |N(v)|` of `u` on `v`.
    pub fn influence_weight(&self, u: NodeId, v: NodeId) -> Result<f64> {
        self.check_node(u)?;
        let nbrs = self.neighbors(v)?;
        if nbrs.binary_search(&u).is_err() {
            return Err(Error::arg(format!("{u} is not a neighbor of {v}")));
        }
        Ok(1.0 / nbrs.len() as f64)
    }

    pub fn features(&self, v: NodeId) -> Result<&[f64]> {
        self.check_node(v)?;
        Ok(&self.features[v])
    }

    pub fn feature_matrix(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Edge list: `(u, v)` per in-edge when directed, `u < v` pairs otherwise.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (v, nbrs) in self.in_adj.iter().enumerate() {
            for &u in nbrs {
                if self.directed || u < v {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub(crate) fn in_adjacency(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v]
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v >= self.node_count() {
            return Err(Error::arg(format!(
                "node {v} out of range (node_count = {})",
                self.node_count()
            )));
        }
        Ok(())
    }
}

/// A set of nodes stored as a dense membership mask.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NodeSet {
    mask: Vec<bool>,
    len: usize,
}

impl NodeSet {
    pub fn empty(node_count: usize) -> Self {
        NodeSet { mask: vec![false; node_count], len: 0 }
    }

    pub fn full(node_count: usize) -> Self {
        NodeSet { mask: vec![true; node_count], len: node_count }
    }

    pub fn from_ids(node_count: usize, ids: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut set = Self::empty(node_count);
        for id in ids {
            if id >= node_count {
                return Err(Error::arg(format!(
                    "node {id} out of range (node_count = {node_count})"
                )));
            }
            set.insert(id);
        }
        Ok(set)
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.mask.get(v).copied().unwrap_or(false)
    }

    /// Returns true if `v` was newly inserted. Panics if `v` is out of range.
    pub fn insert(&mut self, v: NodeId) -> bool {
        let newly = !self.mask[v];
        if newly {
            self.mask[v] = true;
            self.len += 1;
        }
        newly
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn to_vec(&self) -> Vec<NodeId> {
        self.iter().collect()
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.mask.len() == other.mask.len()
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.mask.iter().zip(&other.mask).filter(|(&a, &b)| a && b).count()
    }

    pub fn union_len(&self, other: &NodeSet) -> usize {
        self.mask.iter().zip(&other.mask).filter(|(&a, &b)| a || b).count()
    }

    /// Nodes not in the set, ascending.
    pub fn complement(&self) -> Vec<NodeId> {
        self.mask.iter().enumerate().filter_map(|(i, &m)| (!m).then_some(i)).collect()
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> Graph {
        Graph::from_edge_list(&[(0, 1), (1, 2)], false, None).unwrap()
    }

    #[test]
    fn path_neighbors() {
        let g = path3();
        assert_eq!(g.neighbors(1).unwrap(), &[0, 2]);
        assert_eq!(g.neighbors(0).unwrap(), &[1]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let g = Graph::with_edges(4, [(0, 1)], false, None).unwrap();
        assert!(g.neighbors(3).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_is_argument_error() {
        let g = path3();
        assert!(matches!(g.neighbors(3), Err(Error::Argument(_))));
        assert!(matches!(g.influence_weight(0, 7), Err(Error::Argument(_))));
    }

    #[test]
    fn weights_are_inverse_degree() {
        let g = Graph::from_edge_list(&[(0, 3), (1, 3), (2, 3), (4, 5), (6, 7), (8, 7), (9, 7), (10, 7)], false, None)
            .unwrap();
        assert_eq!(g.influence_weight(0, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(g.influence_weight(4, 5).unwrap(), 1.0);
        assert_eq!(g.influence_weight(6, 7).unwrap(), 0.25);
        assert!(matches!(g.influence_weight(4, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = Graph::from_edge_list(&[(0, 1), (0, 1)], false, None).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(1).unwrap(), &[0]);
    }

    #[test]
    fn directed_reads_in_neighbors() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 0)], true, None).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), &[0]);
        assert_eq!(g.neighbors(0).unwrap(), &[1]);

        let g = Graph::from_edge_list(&[(0, 1)], true, None).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), &[0]);
        assert!(g.neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn self_loops_are_dropped() {
        let g = Graph::from_edge_list(&[(0, 0), (0, 1)], false, None).unwrap();
        assert_eq!(g.neighbors(0).unwrap(), &[1]);
    }

    #[test]
    fn feature_row_mismatch_is_format_error() {
        let err = Graph::from_edge_list(&[(0, 2)], false, Some(vec![vec![1.0]; 2])).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = Graph::from_edge_list(&[(0, 1)], false, Some(vec![vec![1.0], vec![1.0, 2.0]])).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn missing_features_default_to_empty() {
        let g = path3();
        assert_eq!(g.feature_dim(), 0);
        assert!(g.features(2).unwrap().is_empty());
    }

    fn edge_lists() -> impl Strategy<Value = (Vec<(usize, usize)>, bool)> {
        (prop::collection::vec((0usize..30, 0usize..30), 0..120), any::<bool>())
    }

    proptest! {
        #[test]
        fn weights_sum_to_one((edges, directed) in edge_lists()) {
            let g = Graph::from_edge_list(&edges, directed, None).unwrap();
            for v in 0..g.node_count() {
                let nbrs = g.neighbors(v).unwrap();
                if nbrs.is_empty() { continue; }
                let s: f64 = nbrs.iter().map(|&u| g.influence_weight(u, v).unwrap()).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn edge_list_round_trip((edges, directed) in edge_lists()) {
            let g = Graph::from_edge_list(&edges, directed, None).unwrap();
            let again = Graph::from_edge_list(&g.edges(), directed, None).unwrap();
            prop_assert_eq!(g.edges(), again.edges());
            let mut expected: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(u, v)| u != v)
                .map(|&(u, v)| if directed || u < v { (u, v) } else { (v, u) })
                .collect();
            expected.sort_unstable();
            expected.dedup();
            prop_assert_eq!(g.edges(), expected);
        }

        #[test]
        fn undirected_is_symmetric(edges in prop::collection::vec((0usize..20, 0usize..20), 0..80)) {
            let g = Graph::from_edge_list(&edges, false, None).unwrap();
            for v in 0..g.node_count() {
                for &u in g.neighbors(v).unwrap() {
                    prop_assert!(g.neighbors(u).unwrap().contains(&v));
                    prop_assert!(u != v);
                }
            }
        }
    }
}
