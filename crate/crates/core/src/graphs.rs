//! Logical problem graphs: seeded Erdős–Rényi generation, degree statistics
//! and the plain edge-list file format.
//!
//! The file format is a header line `n <node_count>` followed by one `u v`
//! pair per line (0-indexed, written with `u < v`). Lines starting with `#`
//! are comments; the writer records the generator seed and edge probability
//! as `# seed <s>` and `# p <p>` so a saved graph loads back identical.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// An undirected simple graph over nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemGraph {
    node_count: usize,
    /// Sorted, each pair stored as `(u, v)` with `u < v`.
    edges: Vec<(usize, usize)>,
    seed: u64,
    edge_probability: f64,
}

impl ProblemGraph {
    /// Build a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints. Edge orientation is normalized.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            let e = check_edge(node_count, a, b).map_err(Error::InvalidArgument)?;
            if !set.insert(e) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
        }
        let candidates = node_count * (node_count - 1) / 2;
        let edge_probability = if candidates == 0 {
            0.0
        } else {
            set.len() as f64 / candidates as f64
        };
        Ok(ProblemGraph {
            node_count,
            edges: set.into_iter().collect(),
            seed: 0,
            edge_probability,
        })
    }

    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count).flat_map(|i| (i + 1..node_count).map(move |j| (i, j)));
        let mut g = Self::new(node_count, edges).expect("complete graph is simple");
        g.edge_probability = 1.0;
        g
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edge_probability(&self) -> f64 {
        self.edge_probability
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let e = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&e).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

fn check_edge(n: usize, a: usize, b: usize) -> std::result::Result<(usize, usize), String> {
    if a == b {
        return Err(format!("self-loop on node {a}"));
    }
    if a >= n || b >= n {
        return Err(format!("edge ({a}, {b}) references a node >= {n}"));
    }
    Ok(if a < b { (a, b) } else { (b, a) })
}

/// G(n, p): every candidate pair `i < j`, visited in lexicographic order, is
/// kept independently with probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<ProblemGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(ProblemGraph {
        node_count: n,
        edges,
        seed,
        edge_probability: p,
    })
}

/// `(max_degree, 2|E|/n)`.
pub fn degree_stats(g: &ProblemGraph) -> (usize, f64) {
    let max = g.degrees().into_iter().max().unwrap_or(0);
    let avg = 2.0 * g.edge_count() as f64 / g.node_count as f64;
    (max, avg)
}

pub fn graph_to_string(g: &ProblemGraph) -> String {
    let mut out = String::new();
    writeln!(out, "n {}", g.node_count).unwrap();
    writeln!(out, "# seed {}", g.seed).unwrap();
    writeln!(out, "# p {}", g.edge_probability).unwrap();
    for &(u, v) in &g.edges {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}

pub fn parse_graph(text: &str) -> Result<ProblemGraph> {
    let list = parse_edge_list(text)?;
    if let Some(&(line, _)) = list.disabled.first() {
        return Err(Error::parse(line, "`disabled` lines are only valid in hardware files"));
    }
    let n = list.node_count;
    if n == 0 {
        return Err(Error::parse(list.header_line, "graph needs at least one node"));
    }
    let mut set = BTreeSet::new();
    for &(line, a, b) in &list.edges {
        let e = check_edge(n, a, b).map_err(|m| Error::parse(line, m))?;
        if !set.insert(e) {
            return Err(Error::parse(line, format!("duplicate edge ({}, {})", e.0, e.1)));
        }
    }
    let edges: Vec<_> = set.into_iter().collect();
    let candidates = n * (n - 1) / 2;
    let edge_probability = list.probability.unwrap_or(if candidates == 0 {
        0.0
    } else {
        edges.len() as f64 / candidates as f64
    });
    Ok(ProblemGraph {
        node_count: n,
        edges,
        seed: list.seed.unwrap_or(0),
        edge_probability,
    })
}

pub fn save_graph(g: &ProblemGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, graph_to_string(g))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ProblemGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text).map_err(|e| e.with_path(path))
}

/// Raw records of an edge-list file; validation is left to the caller so it
/// can report the offending line.
#[derive(Debug, Default)]
pub(crate) struct EdgeListFile {
    pub node_count: usize,
    pub header_line: usize,
    pub edges: Vec<(usize, usize, usize)>,
    pub disabled: Vec<(usize, usize)>,
    pub seed: Option<u64>,
    pub probability: Option<f64>,
    pub family: Option<String>,
    pub chimera: Option<(usize, [usize; 3])>,
}

pub(crate) fn parse_edge_list(text: &str) -> Result<EdgeListFile> {
    let mut out = EdgeListFile::default();
    let mut have_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("seed"), Some(v)) => {
                    out.seed = Some(v.parse().map_err(|_| Error::parse(line, format!("bad seed `{v}`")))?)
                }
                (Some("p"), Some(v)) => {
                    out.probability =
                        Some(v.parse().map_err(|_| Error::parse(line, format!("bad probability `{v}`")))?)
                }
                (Some("family"), Some(v)) => out.family = Some(v.to_string()),
                (Some("chimera"), Some(v)) => {
                    let dims: Vec<usize> = std::iter::once(v)
                        .chain(parts)
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(line, "bad chimera shape"))?;
                    match dims[..] {
                        [r, c, t] => out.chimera = Some((line, [r, c, t])),
                        _ => return Err(Error::parse(line, "chimera shape needs rows, cols and shore")),
                    }
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if !have_header {
            match fields.as_slice() {
                ["n", count] => {
                    out.node_count = count
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad node count `{count}`")))?;
                    out.header_line = line;
                    have_header = true;
                    continue;
                }
                _ => return Err(Error::parse(line, "expected header `n <node_count>`")),
            }
        }
        match fields.as_slice() {
            ["n", _] => return Err(Error::parse(line, "duplicate header")),
            ["disabled" | "disabled:", id] => {
                let id = id
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad qubit id `{id}`")))?;
                out.disabled.push((line, id));
            }
            [a, b] => {
                let a = a.parse().map_err(|_| Error::parse(line, format!("bad node index `{a}`")))?;
                let b = b.parse().map_err(|_| Error::parse(line, format!("bad node index `{b}`")))?;
                out.edges.push((line, a, b));
            }
            _ => return Err(Error::parse(line, format!("unrecognized line `{trimmed}`"))),
        }
    }
    if !have_header {
        return Err(Error::parse(text.lines().count().max(1), "missing header `n <node_count>`"));
    }
    Ok(out)
}
