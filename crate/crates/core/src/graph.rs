//! Finite undirected strategy graphs.
//!
//! Nodes carry string labels and are addressed internally by dense indices in
//! label-table order. Edges are simple; the reflexive part of adjacency
//! (`s` is adjacent to itself) is computed by [`Graph::are_adjacent`] and never
//! stored.
//!
//! Product graphs label their nodes by joining the factor labels with
//! [`TUPLE_SEP`], so a joint profile over two coalitions reads `"a|x"`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index into a [`Graph`]'s label table.
pub type NodeId = usize;

/// Separator between coordinates of a tuple node label.
pub const TUPLE_SEP: char = '|';

/// Join per-axis labels into a tuple node label.
pub fn tuple_label<S: AsRef<str>>(parts: &[S]) -> String {
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            out.push(TUPLE_SEP);
        }
        out.push_str(p.as_ref());
    }
    out
}

/// A finite simple undirected graph with labeled nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct Graph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    adj: Vec<Vec<NodeId>>,
}

/// On-disk graph document: `{"nodes": [..], "edges": [[u, v], ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl TryFrom<GraphDoc> for Graph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        Graph::from_labeled_edges(doc.nodes, &doc.edges)
    }
}

impl From<Graph> for GraphDoc {
    fn from(g: Graph) -> Self {
        let edges = g.edges().map(|(u, v)| (g.labels[u].clone(), g.labels[v].clone())).collect();
        GraphDoc { nodes: g.labels, edges }
    }
}

impl Graph {
    /// Graph with the given nodes and no edges.
    pub fn isolated<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateNode(l.clone()));
            }
        }
        let adj = vec![Vec::new(); labels.len()];
        Ok(Graph { labels, index, adj })
    }

    /// Build from node labels and index pairs. Duplicate edges collapse;
    /// self-loops are rejected.
    pub fn from_index_edges<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        edges: &[(NodeId, NodeId)],
    ) -> Result<Self> {
        let mut g = Self::isolated(labels)?;
        let n = g.len();
        let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::NodeOutOfRange(u, n));
            }
            if v >= n {
                return Err(Error::NodeOutOfRange(v, n));
            }
            if u == v {
                return Err(Error::SelfLoop(g.labels[u].clone()));
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        g.adj = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(g)
    }

    /// Build from node labels and label pairs.
    pub fn from_labeled_edges<S: Into<String>, E: AsRef<str>>(
        labels: impl IntoIterator<Item = S>,
        edges: &[(E, E)],
    ) -> Result<Self> {
        let g = Self::isolated(labels)?;
        let pairs =
            edges.iter().map(|(a, b)| Ok((g.id(a.as_ref())?, g.id(b.as_ref())?))).collect::<Result<Vec<_>>>()?;
        let labels = g.labels;
        Self::from_index_edges(labels, &pairs)
    }

    pub fn complete<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::from_index_edges(labels, &edges)
    }

    pub fn path<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let edges: Vec<_> = (1..labels.len()).map(|v| (v - 1, v)).collect();
        Self::from_index_edges(labels, &edges)
    }

    pub fn cycle<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        if n >= 3 {
            edges.push((n - 1, 0));
        }
        Self::from_index_edges(labels, &edges)
    }

    /// Star with the first label as hub.
    pub fn star<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let edges: Vec<_> = (1..labels.len()).map(|v| (0, v)).collect();
        Self::from_index_edges(labels, &edges)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, u: NodeId) -> &str {
        &self.labels[u]
    }

    /// Look up a node by label.
    pub fn id(&self, label: &str) -> Result<NodeId> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    fn check(&self, u: NodeId) -> Result<()> {
        if u < self.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange(u, self.len()))
        }
    }

    /// Strict neighbors of `u` in increasing index order.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adj[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u].len()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `true` iff `{u, v}` is an edge or `u == v`.
    pub fn are_adjacent(&self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.adjacent_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn adjacent_unchecked(&self, u: NodeId, v: NodeId) -> bool {
        u == v || self.adj[u].binary_search(&v).is_ok()
    }

    /// Strict edge test (no reflexive part).
    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u != v && u < self.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Connected components, ordered by their smallest node index.
    pub fn connected_components(&self) -> Vec<NodeSubset> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            out.push(NodeSubset(comp));
        }
        out
    }

    /// A graph is connected when it has exactly one component. The empty
    /// graph is not connected.
    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Subgraph induced by `subset`; nodes keep their relative order.
    pub fn induced_subgraph(&self, subset: &NodeSubset) -> Result<Graph> {
        for &u in subset.iter() {
            self.check(u)?;
        }
        let members: Vec<NodeId> = subset.iter().copied().collect();
        let local: HashMap<NodeId, usize> = members.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut edges = Vec::new();
        for (i, &u) in members.iter().enumerate() {
            for v in &self.adj[u] {
                if let Some(&j) = local.get(v) {
                    if j > i {
                        edges.push((i, j));
                    }
                }
            }
        }
        let labels: Vec<String> = members.iter().map(|&u| self.labels[u].clone()).collect();
        Graph::from_index_edges(labels, &edges)
    }

    /// Same graph with nodes reordered to follow `order`, which must be a
    /// permutation of the current labels.
    pub fn reindexed<S: AsRef<str>>(&self, order: &[S]) -> Result<Graph> {
        if order.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("expected {} labels, got {}", self.len(), order.len())));
        }
        let map = order.iter().map(|l| self.id(l.as_ref())).collect::<Result<Vec<_>>>()?;
        let mut inverse = vec![usize::MAX; self.len()];
        for (new, &old) in map.iter().enumerate() {
            inverse[old] = new;
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (inverse[u], inverse[v])).collect();
        Graph::from_index_edges(order.iter().map(|l| l.as_ref().to_string()), &edges)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Graph> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A set of node indices of some graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSubset(BTreeSet<NodeId>);

impl NodeSubset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.0.contains(&u)
    }

    pub fn insert(&mut self, u: NodeId) -> bool {
        self.0.insert(u)
    }

    /// Members in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &NodeSubset) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn to_vec(&self) -> Vec<NodeId> {
        self.0.iter().copied().collect()
    }
}

impl FromIterator<NodeId> for NodeSubset {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        NodeSubset(iter.into_iter().collect())
    }
}

/// Mixed-radix indexing over a tuple of axis sizes; the first axis varies
/// slowest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Radix {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl Radix {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut strides = vec![1; sizes.len()];
        for h in (0..sizes.len().saturating_sub(1)).rev() {
            strides[h] = strides[h + 1] * sizes[h + 1];
        }
        let total = sizes.iter().product();
        Radix { sizes: sizes.to_vec(), strides, total }
    }

    pub(crate) fn total(&self) -> usize {
        self.total
    }

    pub(crate) fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub(crate) fn encode(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub(crate) fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (o, &stride) in out.iter_mut().zip(&self.strides) {
            *o = index / stride;
            index %= stride;
        }
        out
    }

    /// Coordinate of `index` on one axis.
    pub(crate) fn coord(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.sizes[axis]
    }

    /// `index` with its coordinate on `axis` replaced by `value`.
    pub(crate) fn with_coord(&self, index: usize, axis: usize, value: usize) -> usize {
        let cur = self.coord(index, axis);
        index - cur * self.strides[axis] + value * self.strides[axis]
    }
}

/// Strong product of the factors. Nodes are tuples in row-major order (first
/// factor slowest); two distinct tuples are adjacent iff every coordinate
/// pair is adjacent-or-equal in its factor.
pub fn strong_product(factors: &[Graph]) -> Graph {
    let sizes: Vec<usize> = factors.iter().map(Graph::len).collect();
    let radix = Radix::new(&sizes);
    let labels: Vec<String> = (0..radix.total())
        .map(|i| {
            let coords = radix.decode(i);
            let parts: Vec<&str> = coords.iter().zip(factors).map(|(&c, f)| f.label(c)).collect();
            tuple_label(&parts)
        })
        .collect();

    // Closed neighborhoods per factor, then the Cartesian product of them.
    let closed: Vec<Vec<Vec<NodeId>>> = factors
        .iter()
        .map(|f| {
            (0..f.len())
                .map(|u| {
                    let mut ns = f.neighbors(u).to_vec();
                    ns.push(u);
                    ns.sort_unstable();
                    ns
                })
                .collect()
        })
        .collect();

    let mut edges = Vec::new();
    for u in 0..radix.total() {
        let coords = radix.decode(u);
        let mut choice = vec![0usize; factors.len()];
        'outer: loop {
            let v: usize = (0..factors.len()).map(|h| closed[h][coords[h]][choice[h]] * radix.stride(h)).sum();
            if v > u {
                edges.push((u, v));
            }
            for h in (0..factors.len()).rev() {
                choice[h] += 1;
                if choice[h] < closed[h][coords[h]].len() {
                    continue 'outer;
                }
                choice[h] = 0;
            }
            break;
        }
    }
    Graph::from_index_edges(labels, &edges).expect("product labels are distinct and edges valid")
}

/// Factorization of a joint graph into per-coalition factor graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    factors: Vec<Graph>,
    /// Joint node id -> coordinates in the factors.
    axis_map: Vec<Vec<NodeId>>,
    /// Row-major tuple index -> joint node id.
    joint_of: Vec<NodeId>,
    radix: Radix,
}

impl Decomposition {
    pub fn factors(&self) -> &[Graph] {
        &self.factors
    }

    pub fn factor(&self, h: usize) -> &Graph {
        &self.factors[h]
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    /// Factor coordinates of a joint node.
    pub fn coords(&self, joint: NodeId) -> &[NodeId] {
        &self.axis_map[joint]
    }

    /// Joint node with the given factor coordinates.
    pub fn joint(&self, coords: &[NodeId]) -> NodeId {
        self.joint_of[self.radix.encode(coords)]
    }
}

/// Factor `g` over the given per-coalition axes.
///
/// Node labels of `g` must be tuples (see [`TUPLE_SEP`]) whose coordinates
/// come from the matching axis, and every tuple of the Cartesian product
/// must appear exactly once. The candidate factor on axis `h` has an edge
/// `{x, y}` iff every pair of joint nodes differing only on axis `h` by
/// `x <-> y` is adjacent in `g`; the candidates are accepted only if their
/// strong product reproduces `g` exactly.
pub fn factorize<S: AsRef<str>>(g: &Graph, axes: &[Vec<S>]) -> Result<Decomposition> {
    if axes.is_empty() {
        return Err(Error::InvalidArgument("at least one axis is required".into()));
    }
    let axis_index: Vec<HashMap<&str, usize>> = axes
        .iter()
        .map(|ax| {
            let mut m = HashMap::new();
            for (i, l) in ax.iter().enumerate() {
                if m.insert(l.as_ref(), i).is_some() {
                    return Err(Error::DuplicateNode(l.as_ref().to_string()));
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let radix = Radix::new(&sizes);
    let r = axes.len();

    let mut axis_map = Vec::with_capacity(g.len());
    let mut joint_of = vec![usize::MAX; radix.total()];
    for u in 0..g.len() {
        let label = g.label(u);
        let parts: Vec<&str> = if r == 1 { vec![label] } else { label.split(TUPLE_SEP).collect() };
        if parts.len() != r {
            return Err(Error::MalformedTuple {
                label: label.to_string(),
                reason: format!("expected {r} coordinates, found {}", parts.len()),
            });
        }
        let coords = parts
            .iter()
            .zip(&axis_index)
            .map(|(p, m)| {
                m.get(p).copied().ok_or_else(|| Error::MalformedTuple {
                    label: label.to_string(),
                    reason: format!("coordinate `{p}` is not on its axis"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let t = radix.encode(&coords);
        if joint_of[t] != usize::MAX {
            return Err(Error::NotCartesian(format!("tuple `{label}` appears twice")));
        }
        joint_of[t] = u;
        axis_map.push(coords);
    }
    if g.len() != radix.total() {
        return Err(Error::NotCartesian(format!("{} nodes for a product of size {}", g.len(), radix.total())));
    }

    let mut factors = Vec::with_capacity(r);
    for h in 0..r {
        let mut edges = Vec::new();
        for x in 0..sizes[h] {
            for y in x + 1..sizes[h] {
                let all = (0..radix.total())
                    .filter(|&t| radix.coord(t, h) == x)
                    .all(|t| g.has_edge(joint_of[t], joint_of[radix.with_coord(t, h, y)]));
                if all {
                    edges.push((x, y));
                }
            }
        }
        factors.push(Graph::from_index_edges(axes[h].iter().map(|l| l.as_ref().to_string()), &edges)?);
    }

    let product = strong_product(&factors);
    if product.edge_count() != g.edge_count() {
        return Err(Error::NotDecomposable);
    }
    for (u, v) in g.edges() {
        if !product.has_edge(radix.encode(&axis_map[u]), radix.encode(&axis_map[v])) {
            return Err(Error::NotDecomposable);
        }
    }
    Ok(Decomposition { factors, axis_map, joint_of, radix })
}
