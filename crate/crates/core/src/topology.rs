//! Physical qubit/coupler graphs.
//!
//! A [`HardwareGraph`] is a fixed set of qubits `0..qubit_count` with their
//! couplers, plus a set of disabled qubits. The effective graph is the
//! subgraph induced by the qubits that are still enabled. Removal operations
//! return new values and share the underlying coupler data.
//!
//! Files use the problem-graph edge-list format with optional
//! `disabled <id>` lines, a `# family <tag>` comment and, for generated
//! Chimera graphs, a `# chimera <rows> <cols> <shore>` comment.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graphs::parse_edge_list;

pub type QubitId = usize;

#[derive(Debug, PartialEq)]
struct Base {
    family: String,
    chimera: Option<ChimeraShape>,
    couplers: Vec<(QubitId, QubitId)>,
    adjacency: Vec<Vec<QubitId>>,
}

/// Cell grid of a Chimera graph laid out by [`chimera_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChimeraShape {
    pub rows: usize,
    pub cols: usize,
    pub shore: usize,
}

impl ChimeraShape {
    pub fn index(&self, i: usize, j: usize, u: usize, k: usize) -> QubitId {
        chimera_index(self.cols, self.shore, i, j, u, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareGraph {
    base: Arc<Base>,
    disabled: Vec<bool>,
    disabled_count: usize,
}

impl HardwareGraph {
    /// Build from a qubit count and coupler list. Couplers must reference
    /// qubits below `qubit_count`.
    pub fn new(
        qubit_count: usize,
        couplers: impl IntoIterator<Item = (QubitId, QubitId)>,
        family: impl Into<String>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in couplers {
            if a >= qubit_count || b >= qubit_count {
                return Err(Error::Validation(format!(
                    "coupler ({a}, {b}) references a qubit outside 0..{qubit_count}"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("coupler on a single qubit {a}")));
            }
            set.insert(if a < b { (a, b) } else { (b, a) });
        }
        let couplers: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); qubit_count];
        for &(a, b) in &couplers {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(HardwareGraph {
            base: Arc::new(Base {
                family: family.into(),
                chimera: None,
                couplers,
                adjacency,
            }),
            disabled: vec![false; qubit_count],
            disabled_count: 0,
        })
    }

    pub fn family(&self) -> &str {
        &self.base.family
    }

    /// Cell layout when the graph was generated as Chimera.
    pub fn chimera_shape(&self) -> Option<ChimeraShape> {
        self.base.chimera
    }

    pub fn qubit_count(&self) -> usize {
        self.disabled.len()
    }

    /// Every coupler of the underlying graph, disabled or not.
    pub fn couplers(&self) -> &[(QubitId, QubitId)] {
        &self.base.couplers
    }

    /// Neighbors in the underlying graph, sorted.
    pub fn neighbors(&self, q: QubitId) -> &[QubitId] {
        &self.base.adjacency[q]
    }

    pub fn has_coupler(&self, a: QubitId, b: QubitId) -> bool {
        a < self.qubit_count() && self.base.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn is_active(&self, q: QubitId) -> bool {
        q < self.disabled.len() && !self.disabled[q]
    }

    pub fn disabled(&self) -> BTreeSet<QubitId> {
        self.disabled
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn effective_count(&self) -> usize {
        self.qubit_count() - self.disabled_count
    }

    pub fn effective_qubits(&self) -> impl Iterator<Item = QubitId> + '_ {
        (0..self.qubit_count()).filter(|&q| !self.disabled[q])
    }

    pub fn effective_couplers(&self) -> impl Iterator<Item = (QubitId, QubitId)> + '_ {
        self.base
            .couplers
            .iter()
            .copied()
            .filter(|&(a, b)| !self.disabled[a] && !self.disabled[b])
    }

    /// Enabled neighbors of `q`.
    pub fn active_neighbors(&self, q: QubitId) -> impl Iterator<Item = QubitId> + '_ {
        self.base.adjacency[q].iter().copied().filter(|&r| !self.disabled[r])
    }

    fn check_known(&self, nodes: &BTreeSet<QubitId>) -> Result<()> {
        match nodes.iter().find(|&&q| q >= self.qubit_count()) {
            Some(q) => Err(Error::InvalidArgument(format!(
                "qubit {q} is not part of a {}-qubit graph",
                self.qubit_count()
            ))),
            None => Ok(()),
        }
    }

    fn with_disabled(&self, extra: impl IntoIterator<Item = QubitId>) -> Self {
        let mut out = self.clone();
        for q in extra {
            if !out.disabled[q] {
                out.disabled[q] = true;
                out.disabled_count += 1;
            }
        }
        out
    }

    /// Disable `nodes`.
    pub fn remove_nodes(&self, nodes: &BTreeSet<QubitId>) -> Result<Self> {
        self.check_known(nodes)?;
        Ok(self.with_disabled(nodes.iter().copied()))
    }

    /// Disable `nodes` and every enabled neighbor of them.
    pub fn remove_nodes_and_neighbors(&self, nodes: &BTreeSet<QubitId>) -> Result<Self> {
        self.check_known(nodes)?;
        let mut all = nodes.clone();
        for &q in nodes {
            all.extend(self.active_neighbors(q));
        }
        Ok(self.with_disabled(all))
    }
}

/// Index of qubit `k` on side `u` of the cell at row `i`, column `j`.
pub fn chimera_index(cols: usize, shore: usize, i: usize, j: usize, u: usize, k: usize) -> QubitId {
    ((i * cols + j) * 2 + u) * shore + k
}

/// Chimera graph of `rows x cols` cells, each a complete bipartite
/// `K_{shore,shore}`. Side-0 qubits couple to the same position in the cell
/// below; side-1 qubits couple to the same position in the cell to the right.
pub fn gen_chimera(rows: usize, cols: usize, shore: usize) -> Result<HardwareGraph> {
    if rows == 0 || cols == 0 || shore == 0 {
        return Err(Error::InvalidArgument(format!(
            "chimera dimensions must be positive, got ({rows}, {cols}, {shore})"
        )));
    }
    let idx = |i, j, u, k| chimera_index(cols, shore, i, j, u, k);
    let mut couplers = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            for k in 0..shore {
                for l in 0..shore {
                    couplers.push((idx(i, j, 0, k), idx(i, j, 1, l)));
                }
                if i + 1 < rows {
                    couplers.push((idx(i, j, 0, k), idx(i + 1, j, 0, k)));
                }
                if j + 1 < cols {
                    couplers.push((idx(i, j, 1, k), idx(i, j + 1, 1, k)));
                }
            }
        }
    }
    let mut h = HardwareGraph::new(rows * cols * 2 * shore, couplers, "chimera")?;
    Arc::get_mut(&mut h.base).expect("fresh graph").chimera = Some(ChimeraShape { rows, cols, shore });
    Ok(h)
}

pub fn hardware_to_string(h: &HardwareGraph) -> String {
    let mut out = String::new();
    writeln!(out, "n {}", h.qubit_count()).unwrap();
    writeln!(out, "# family {}", h.family()).unwrap();
    if let Some(c) = h.chimera_shape() {
        writeln!(out, "# chimera {} {} {}", c.rows, c.cols, c.shore).unwrap();
    }
    for &(a, b) in h.couplers() {
        writeln!(out, "{a} {b}").unwrap();
    }
    for q in h.disabled() {
        writeln!(out, "disabled {q}").unwrap();
    }
    out
}

pub fn parse_hardware(text: &str) -> Result<HardwareGraph> {
    let list = parse_edge_list(text)?;
    let n = list.node_count;
    let mut seen = BTreeSet::new();
    for &(line, a, b) in &list.edges {
        if a >= n || b >= n {
            return Err(Error::Validation(format!(
                "line {line}: coupler ({a}, {b}) references a qubit outside 0..{n}"
            )));
        }
        if a == b {
            return Err(Error::parse(line, format!("coupler on a single qubit {a}")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::parse(line, format!("duplicate coupler ({a}, {b})")));
        }
    }
    let family = list.family.unwrap_or_else(|| "file".to_string());
    let h = match list.chimera {
        Some((line, [rows, cols, shore])) => {
            let g = gen_chimera(rows, cols, shore).map_err(|e| Error::parse(line, e.to_string()))?;
            if g.qubit_count() != n || g.couplers().iter().ne(seen.iter()) {
                return Err(Error::Validation(format!("line {line}: couplers do not form chimera({rows},{cols},{shore})")));
            }
            let mut g = g;
            Arc::get_mut(&mut g.base).expect("fresh graph").family = family;
            g
        }
        None => HardwareGraph::new(n, seen, family)?,
    };
    let mut disabled = BTreeSet::new();
    for &(line, q) in &list.disabled {
        if q >= n {
            return Err(Error::Validation(format!("line {line}: disabled qubit {q} outside 0..{n}")));
        }
        disabled.insert(q);
    }
    h.remove_nodes(&disabled)
}

pub fn save_hardware(h: &HardwareGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, hardware_to_string(h))?;
    Ok(())
}

pub fn load_hardware(path: impl AsRef<Path>) -> Result<HardwareGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_hardware(&text).map_err(|e| e.with_path(path))
}
