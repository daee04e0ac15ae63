//! Sparse undirected simple graph in compressed neighbor-list (CSR) form.
//!
//! Every undirected edge is stored in both endpoint lists, so the flat
//! neighbor array has length 2M. The position of a neighbor entry doubles
//! as a directed-edge index, which the message-passing engines use to
//! address per-edge state; `reverse_edge` maps the slot for i→j to the
//! slot for j→i in constant time.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Graph {
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    edge_source: Vec<u32>,
    reverse: Vec<u32>,
    n_edges: usize,
}

/// Old-to-new index correspondence produced by subgraph extraction.
#[derive(Debug, Clone)]
pub struct NodeMap {
    pub old_to_new: Vec<Option<u32>>,
    pub new_to_old: Vec<u32>,
}

impl Graph {
    /// Build from a list of undirected edges given as (i, j) with i < j.
    /// Rejects self-loops, duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if n > u32::MAX as usize - 1 {
            return Err(Error::InvalidGraph(format!("node count {n} too large")));
        }
        let mut sorted: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            sorted.push(if a < b { (a, b) } else { (b, a) });
        }
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_unique(n, &sorted))
    }

    /// Internal fast path: edges must be sorted, unique, with i < j.
    pub(crate) fn from_sorted_unique(n: usize, edges: &[(u32, u32)]) -> Self {
        let m = edges.len();
        let mut degrees = vec![0u32; n];
        for &(a, b) in edges {
            degrees[a as usize] += 1;
            degrees[b as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degrees[i];
        }
        let mut neighbors = vec![0u32; 2 * m];
        let mut edge_source = vec![0u32; 2 * m];
        let mut cursor: Vec<u32> = offsets[..n].to_vec();
        for &(a, b) in edges {
            let ea = cursor[a as usize];
            neighbors[ea as usize] = b;
            edge_source[ea as usize] = a;
            cursor[a as usize] += 1;
            let eb = cursor[b as usize];
            neighbors[eb as usize] = a;
            edge_source[eb as usize] = b;
            cursor[b as usize] += 1;
        }
        // Neighbor lists come out sorted because the edge list is sorted
        // by (min, max); entries for node v from its role as the larger
        // endpoint are interleaved in increasing order of the smaller one.
        // Sort defensively anyway only in debug builds.
        debug_assert!((0..n).all(|i| {
            let s = &neighbors[offsets[i] as usize..offsets[i + 1] as usize];
            s.windows(2).all(|w| w[0] < w[1])
        }));
        let mut reverse = vec![0u32; 2 * m];
        for e in 0..2 * m {
            let i = edge_source[e];
            let j = neighbors[e];
            let slice =
                &neighbors[offsets[j as usize] as usize..offsets[j as usize + 1] as usize];
            let pos = slice.binary_search(&i).expect("reverse edge must exist");
            reverse[e] = offsets[j as usize] + pos as u32;
        }
        Graph {
            offsets,
            neighbors,
            edge_source,
            reverse,
            n_edges: m,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges M.
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Number of directed edge slots (2M).
    pub fn n_directed(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n_nodes() == 0 {
            0.0
        } else {
            2.0 * self.n_edges as f64 / self.n_nodes() as f64
        }
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Directed-edge indices of the out-slots of node i.
    pub fn out_edges(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i] as usize..self.offsets[i + 1] as usize
    }

    pub fn edge_target(&self, e: usize) -> usize {
        self.neighbors[e] as usize
    }

    pub fn edge_source(&self, e: usize) -> usize {
        self.edge_source[e] as usize
    }

    /// Slot of the reverse directed edge: if e is i→j, returns j→i.
    pub fn reverse_edge(&self, e: usize) -> usize {
        self.reverse[e] as usize
    }

    /// Undirected edges as (i, j) with i < j, in sorted order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_directed()).filter_map(move |e| {
            let i = self.edge_source[e];
            let j = self.neighbors[e];
            (i < j).then_some((i, j))
        })
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Connected component id per node, ids assigned in discovery order
    /// (component 0 contains node 0).
    pub fn components(&self) -> (usize, Vec<u32>) {
        let n = self.n_nodes();
        let mut comp = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        let mut next = 0u32;
        for start in 0..n {
            if comp[start] != u32::MAX {
                continue;
            }
            comp[start] = next;
            queue.push_back(start as u32);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u as usize) {
                    if comp[v as usize] == u32::MAX {
                        comp[v as usize] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        (next as usize, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes() <= 1 || self.components().0 == 1
    }

    /// Induced subgraph on the largest connected component together with
    /// the index correspondence. Size ties go to the component containing
    /// the smallest original node index (the first one discovered).
    pub fn largest_connected_component(&self) -> Result<(Graph, NodeMap)> {
        let n = self.n_nodes();
        if n == 0 {
            return Err(Error::InvalidGraph("empty graph has no components".into()));
        }
        let (ncomp, comp) = self.components();
        let mut sizes = vec![0u32; ncomp];
        for &c in &comp {
            sizes[c as usize] += 1;
        }
        // first max wins: discovery order makes this the tie rule above
        let best = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i as u32)
            .unwrap();
        let mut old_to_new = vec![None; n];
        let mut new_to_old = Vec::new();
        for (old, &c) in comp.iter().enumerate() {
            if c == best {
                old_to_new[old] = Some(new_to_old.len() as u32);
                new_to_old.push(old as u32);
            }
        }
        let mut edges = Vec::new();
        for (i, j) in self.undirected_edges() {
            if let (Some(a), Some(b)) = (old_to_new[i as usize], old_to_new[j as usize]) {
                edges.push((a, b));
            }
        }
        edges.sort_unstable();
        let sub = Graph::from_sorted_unique(new_to_old.len(), &edges);
        Ok((
            sub,
            NodeMap {
                old_to_new,
                new_to_old,
            },
        ))
    }

    /// Structural validity: symmetry, sortedness, no loops or duplicates,
    /// degree bookkeeping. Intended for tests and file ingestion.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_nodes();
        let mut total = 0usize;
        for i in 0..n {
            let nbrs = self.neighbors(i);
            total += nbrs.len();
            for w in nbrs.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidGraph(format!(
                        "neighbor list of {i} not strictly sorted"
                    )));
                }
            }
            for &j in nbrs {
                if j as usize == i {
                    return Err(Error::InvalidGraph(format!("self-loop at {i}")));
                }
                if self.neighbors(j as usize).binary_search(&(i as u32)).is_err() {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric adjacency: {i}→{j} present, {j}→{i} missing"
                    )));
                }
            }
        }
        if total != 2 * self.n_edges {
            return Err(Error::InvalidGraph(format!(
                "degree sum {total} != 2M = {}",
                2 * self.n_edges
            )));
        }
        for e in 0..self.n_directed() {
            let r = self.reverse_edge(e);
            if self.reverse_edge(r) != e
                || self.edge_source(r) != self.edge_target(e)
                || self.edge_target(r) != self.edge_source(e)
            {
                return Err(Error::InvalidGraph(format!("bad reverse index at slot {e}")));
            }
        }
        Ok(())
    }
}
