//! Attributed networks, subgraphs, connectivity, and subgraph set algebra.
//!
//! Node ids are opaque strings mapped to dense indices internally; every
//! deterministic ordering is the lexicographic order of the original strings.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph with one empirical p-value per node.
#[derive(Debug, Clone)]
pub struct AttributedNetwork {
    network_id: String,
    names: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    pvalues: Vec<f64>,
}

impl AttributedNetwork {
    /// Builds a network from an edge list and a complete node -> p-value map.
    ///
    /// The node set is the key set of `pvalues`; every edge endpoint must be a
    /// known node. Self-loops are rejected. Duplicate or reversed edge pairs are
    /// merged (the graph is undirected) with a warning.
    pub fn new(
        network_id: impl Into<String>,
        edges: impl IntoIterator<Item = (String, String)>,
        pvalues: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let network_id = network_id.into();
        for (node, p) in &pvalues {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::input(format!(
                    "p-value for node `{node}` in network `{network_id}` is {p}, expected (0,1]"
                )));
            }
        }
        let names: Vec<String> = pvalues.keys().cloned().collect();
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let pvals: Vec<f64> = names.iter().map(|n| pvalues[n]).collect();

        let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut duplicates = 0usize;
        for (u, v) in edges {
            if u == v {
                return Err(Error::input(format!(
                    "self-loop on node `{u}` in network `{network_id}`"
                )));
            }
            let ui = *index.get(&u).ok_or_else(|| {
                Error::input(format!(
                    "edge endpoint `{u}` has no p-value entry in network `{network_id}`"
                ))
            })?;
            let vi = *index.get(&v).ok_or_else(|| {
                Error::input(format!(
                    "edge endpoint `{v}` has no p-value entry in network `{network_id}`"
                ))
            })?;
            let key = (ui.min(vi), ui.max(vi));
            if !edge_set.insert(key) {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!(
                "network `{network_id}`: merged {duplicates} duplicate/reversed edge pairs (graph is undirected)"
            );
        }

        let mut neighbors = vec![Vec::new(); names.len()];
        for &(a, b) in &edge_set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        Ok(AttributedNetwork {
            network_id,
            names,
            index,
            neighbors,
            edges: edge_set.into_iter().collect(),
            pvalues: pvals,
        })
    }

    pub fn network_id(&self) -> &str {
        &self.network_id
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node names in index order (lexicographic).
    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name_of(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn pvalue_at(&self, idx: usize) -> f64 {
        self.pvalues[idx]
    }

    pub fn pvalue(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.pvalues[i])
    }

    pub fn neighbors_of(&self, idx: usize) -> &[usize] {
        &self.neighbors[idx]
    }

    pub fn edges_idx(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Subgraph induced by a set of dense node indices.
    pub fn subgraph_from_indices(&self, indices: &[usize]) -> Subgraph {
        let in_set: BTreeSet<usize> = indices.iter().copied().collect();
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for &i in &in_set {
            nodes.insert(self.names[i].clone());
            for &j in &self.neighbors[i] {
                if j > i && in_set.contains(&j) {
                    edges.insert(ordered_pair(&self.names[i], &self.names[j]));
                }
            }
        }
        Subgraph {
            network_id: self.network_id.clone(),
            nodes,
            edges,
        }
    }

    pub fn empty_subgraph(&self) -> Subgraph {
        Subgraph::empty(&self.network_id)
    }

    /// Canonical edge-list serialization: one `u<TAB>v` line per edge, nodes
    /// within a pair and pairs themselves in lexicographic order.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = ordered_pair_ref(&self.names[a], &self.names[b]);
                (x, y)
            })
            .collect();
        lines.sort_unstable();
        for (u, v) in lines {
            writeln!(out, "{u}\t{v}")?;
        }
        Ok(())
    }

    /// Canonical p-value serialization: `node<TAB>pvalue`, nodes sorted.
    pub fn write_pvalue_file<W: Write>(&self, mut out: W) -> Result<()> {
        for (name, p) in self.names.iter().zip(&self.pvalues) {
            writeln!(out, "{name}\t{p}")?;
        }
        Ok(())
    }

    /// Loads a network from an edge-list file and a p-value file.
    pub fn from_files(
        network_id: impl Into<String>,
        edge_path: impl AsRef<Path>,
        pvalue_path: impl AsRef<Path>,
    ) -> Result<Self> {
        let edges = read_edge_list(edge_path)?;
        let pvalues = read_pvalue_file(pvalue_path)?;
        Self::new(network_id, edges, pvalues)
    }

    /// Loads a topology-only network, assigning every node the given p-value.
    /// Nodes are the endpoints appearing in the edge list.
    pub fn from_edge_file_uniform(
        network_id: impl Into<String>,
        edge_path: impl AsRef<Path>,
        pvalue: f64,
    ) -> Result<Self> {
        let edges = read_edge_list(edge_path)?;
        let mut pvalues = BTreeMap::new();
        for (u, v) in &edges {
            pvalues.insert(u.clone(), pvalue);
            pvalues.insert(v.clone(), pvalue);
        }
        Self::new(network_id, edges, pvalues)
    }

    /// Replaces every p-value with the given constant (attributeless view).
    pub fn with_constant_pvalues(&self, pvalue: f64) -> Result<Self> {
        if !(pvalue > 0.0 && pvalue <= 1.0) {
            return Err(Error::input(format!(
                "constant p-value {pvalue} outside (0,1]"
            )));
        }
        let mut net = self.clone();
        net.pvalues = vec![pvalue; net.names.len()];
        Ok(net)
    }
}

/// Node subset of one network together with an explicit edge set.
///
/// Detection operations always produce induced, connected (or empty)
/// subgraphs; the set-algebra operations combine edge sets literally and may
/// leave edges with an endpoint outside `nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    network_id: String,
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl Subgraph {
    pub fn empty(network_id: impl Into<String>) -> Self {
        Subgraph {
            network_id: network_id.into(),
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn from_parts(
        network_id: impl Into<String>,
        nodes: BTreeSet<String>,
        edges: BTreeSet<(String, String)>,
    ) -> Self {
        let edges = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        Subgraph {
            network_id: network_id.into(),
            nodes,
            edges,
        }
    }

    pub fn network_id(&self) -> &str {
        &self.network_id
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    /// Adjacency restricted to edges whose both endpoints are present.
    fn internal_adjacency(&self) -> HashMap<&str, Vec<&str>> {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for (a, b) in &self.edges {
            if self.nodes.contains(a) && self.nodes.contains(b) {
                adj.entry(a.as_str()).or_default().push(b.as_str());
                adj.entry(b.as_str()).or_default().push(a.as_str());
            }
        }
        adj
    }

    /// Compact single-line rendering for logs.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{}[", self.network_id);
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(n);
        }
        s.push(']');
        s
    }
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn ordered_pair_ref<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Subgraph induced on `net` by `node_set`: all of the network's edges with
/// both endpoints inside the set.
pub fn induced_subgraph(net: &AttributedNetwork, node_set: &BTreeSet<String>) -> Result<Subgraph> {
    let mut indices = Vec::with_capacity(node_set.len());
    for name in node_set {
        let idx = net.index_of(name).ok_or_else(|| {
            Error::input(format!(
                "unknown node `{name}` in network `{}`",
                net.network_id()
            ))
        })?;
        indices.push(idx);
    }
    Ok(net.subgraph_from_indices(&indices))
}

/// Set-algebra mode for [`subgraph_set_op`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

/// Combines node and edge sets set-theoretically, without re-inducing edges.
///
/// Difference subtracts nodes and edges independently, so the result may keep
/// an edge whose endpoint was removed; callers that need a well-formed graph
/// re-induce via [`induced_subgraph`].
pub fn subgraph_set_op(s1: &Subgraph, s2: &Subgraph, mode: SetOp) -> Result<Subgraph> {
    if s1.network_id != s2.network_id {
        return Err(Error::input(format!(
            "subgraph set op across networks `{}` and `{}`",
            s1.network_id, s2.network_id
        )));
    }
    let (nodes, edges) = match mode {
        SetOp::Union => (
            s1.nodes.union(&s2.nodes).cloned().collect(),
            s1.edges.union(&s2.edges).cloned().collect(),
        ),
        SetOp::Intersection => (
            s1.nodes.intersection(&s2.nodes).cloned().collect(),
            s1.edges.intersection(&s2.edges).cloned().collect(),
        ),
        SetOp::Difference => (
            s1.nodes.difference(&s2.nodes).cloned().collect(),
            s1.edges.difference(&s2.edges).cloned().collect(),
        ),
    };
    Ok(Subgraph {
        network_id: s1.network_id.clone(),
        nodes,
        edges,
    })
}

/// True iff the node set is empty, a singleton, or one connected component
/// under the subgraph's internal edges. The empty subgraph counts as
/// connected so detection can return "no anomaly" without a special case.
pub fn is_connected(s: &Subgraph) -> bool {
    if s.nodes.len() <= 1 {
        return true;
    }
    let adj = s.internal_adjacency();
    let start = s.nodes.iter().next().unwrap().as_str();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        if let Some(nbrs) = adj.get(u) {
            for &v in nbrs {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
    }
    seen.len() == s.nodes.len()
}

/// Maximal connected components, ordered by their smallest node id.
/// Each component keeps the subgraph's internal edges between its nodes.
pub fn connected_components(s: &Subgraph) -> Vec<Subgraph> {
    let adj = s.internal_adjacency();
    let mut assigned: BTreeSet<&str> = BTreeSet::new();
    let mut components = Vec::new();
    for node in &s.nodes {
        if assigned.contains(node.as_str()) {
            continue;
        }
        let mut members: BTreeSet<String> = BTreeSet::new();
        let mut queue = VecDeque::new();
        assigned.insert(node.as_str());
        queue.push_back(node.as_str());
        while let Some(u) = queue.pop_front() {
            members.insert(u.to_string());
            if let Some(nbrs) = adj.get(u) {
                for &v in nbrs {
                    if assigned.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
        }
        let edges = s
            .edges
            .iter()
            .filter(|(a, b)| members.contains(a) && members.contains(b))
            .cloned()
            .collect();
        components.push(Subgraph {
            network_id: s.network_id.clone(),
            nodes: members,
            edges,
        });
    }
    components
}

/// Reads `u<TAB>v` edge lines; `#` starts a comment, blank lines are skipped.
pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open edge list {}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (u, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected `u<TAB>v`, got `{body}`"),
                })
            }
        };
        edges.push((u.to_string(), v.to_string()));
    }
    Ok(edges)
}

/// Reads `node<TAB>pvalue` lines; `#` starts a comment.
pub fn read_pvalue_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open p-value file {}: {e}", path.display())))?;
    let mut pvalues = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (node, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(v), None) => (n, v),
            _ => {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected `node<TAB>pvalue`, got `{body}`"),
                })
            }
        };
        let p: f64 = value.parse().map_err(|_| Error::Parse {
            file: path.display().to_string(),
            line: lineno + 1,
            msg: format!("bad p-value `{value}`"),
        })?;
        if pvalues.insert(node.to_string(), p).is_some() {
            return Err(Error::Parse {
                file: path.display().to_string(),
                line: lineno + 1,
                msg: format!("duplicate p-value entry for node `{node}`"),
            });
        }
    }
    Ok(pvalues)
}
