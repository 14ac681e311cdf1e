//! Native clique layout for Chimera graphs, used when the heuristic search
//! gives up.
//!
//! In a block of `m x m` cells, logical node `shore·k + t` takes position `t`
//! of the side-0 qubits in block column `k` over rows `0..=k`, and position
//! `t` of the side-1 qubits in block row `k` over columns `k..m`. The two
//! halves meet in cell `(k, k)`. Nodes `k < k'` touch in cell `(k, k')`, so
//! every pair is coupled and each chain has `m + 1` qubits. The mirrored
//! layout uses the lower triangle of the block instead.

use crate::topology::{ChimeraShape, HardwareGraph, QubitId};

fn layout(c: ChimeraShape, n: usize, r0: usize, c0: usize, upper: bool) -> Vec<Vec<QubitId>> {
    let m = n.div_ceil(c.shore);
    (0..n)
        .map(|v| {
            let (k, t) = (v / c.shore, v % c.shore);
            let (rows, cols) = if upper { (0..k + 1, k..m) } else { (k..m, 0..k + 1) };
            let vertical = rows.map(|i| c.index(r0 + i, c0 + k, 0, t));
            let horizontal = cols.map(|j| c.index(r0 + k, c0 + j, 1, t));
            vertical.chain(horizontal).collect()
        })
        .collect()
}

/// First placement, in row-major block order, whose qubits are all enabled.
pub(crate) fn place_clique(n: usize, h: &HardwareGraph) -> Option<Vec<Vec<QubitId>>> {
    let c = h.chimera_shape()?;
    let m = n.div_ceil(c.shore);
    if n == 0 || m > c.rows || m > c.cols {
        return None;
    }
    for r0 in 0..=c.rows - m {
        for c0 in 0..=c.cols - m {
            for upper in [true, false] {
                let chains = layout(c, n, r0, c0, upper);
                if chains.iter().flatten().all(|&q| h.is_active(q)) {
                    return Some(chains);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{validate_embedding, Embedding};
    use crate::graphs::ProblemGraph;
    use crate::topology::gen_chimera;

    #[test]
    fn layouts_embed_the_complete_graph() {
        let h = gen_chimera(5, 6, 4).unwrap();
        let c = h.chimera_shape().unwrap();
        for n in [1, 3, 4, 9, 16, 20] {
            for upper in [true, false] {
                let chains = layout(c, n, 0, 1, upper);
                let m = n.div_ceil(4);
                assert!(chains.iter().all(|ch| ch.len() == m + 1));
                validate_embedding(&ProblemGraph::complete(n), &Embedding::new(chains), &h).unwrap();
            }
        }
    }

    #[test]
    fn placement_skips_used_cells() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let first = place_clique(12, &h).unwrap();
        let used = first.iter().flatten().copied().collect();
        let rest = h.remove_nodes(&used).unwrap();
        let second = place_clique(12, &rest).unwrap();
        validate_embedding(&ProblemGraph::complete(12), &Embedding::new(second.clone()), &rest).unwrap();
        assert!(second.iter().flatten().all(|q| !used.contains(q)));
        assert_eq!(place_clique(17, &h), None);
        assert_eq!(place_clique(4, &crate::topology::HardwareGraph::new(2, [(0, 1)], "file").unwrap()), None);
    }
}
