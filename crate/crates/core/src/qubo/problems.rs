//! Minimum vertex cover and balanced graph partitioning objectives.

use serde::{Deserialize, Serialize};

use super::Qubo;
use crate::error::{Error, Result};
use crate::graphs::{degree_stats, ProblemGraph};

pub const DEFAULT_MVCP_A: f64 = 2.0;
pub const DEFAULT_MVCP_B: f64 = 1.0;

/// `A Σ_{(i,j)∈E} (1 - x_i)(1 - x_j) + B Σ_i x_i`, requiring `0 < B < A`.
pub fn build_mvcp_qubo(g: &ProblemGraph, a: f64, b: f64) -> Result<Qubo> {
    if !(b > 0.0 && b < a && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "vertex cover weights need 0 < B < A, got A = {a}, B = {b}"
        )));
    }
    let mut q = Qubo::new(g.node_count());
    for i in 0..g.node_count() {
        q.add_linear(i, b);
    }
    for &(i, j) in g.edges() {
        q.add_offset(a);
        q.add_linear(i, -a);
        q.add_linear(j, -a);
        q.add_quadratic(i, j, a);
    }
    Ok(q)
}

/// `B · min(2Δ, |V|) / 8`, the published lower bound on the balance weight.
pub fn gpp_penalty_bound(g: &ProblemGraph, b: f64) -> f64 {
    let (max_degree, _) = degree_stats(g);
    b * (2 * max_degree).min(g.node_count()) as f64 / 8.0
}

/// Balance weight under which every minimizer of the 0/1 formulation is a
/// balanced partition: `B · min(Δ, |V|/2) + B/2`.
///
/// The published bound is stated for the ±1 form `(Σ s_i)²`, which is four
/// times the 0/1 term `(Σ x_i - |V|/2)²`. Moving one vertex out of a balanced
/// partition costs `A` in the 0/1 form and removes at most `min(Δ, |V|/2)` cut
/// edges, so the weight must exceed that; the extra `B/2` keeps it strict.
pub fn gpp_balanced_penalty(g: &ProblemGraph, b: f64) -> f64 {
    4.0 * gpp_penalty_bound(g, b) + b / 2.0
}

/// How the partitioning balance weight `A` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum GppPenalty {
    /// [`gpp_balanced_penalty`].
    #[default]
    Balanced,
    /// [`gpp_penalty_bound`] with equality.
    LowerBound,
    Explicit(f64),
}

impl GppPenalty {
    pub fn resolve(self, g: &ProblemGraph, b: f64) -> f64 {
        match self {
            GppPenalty::Balanced => gpp_balanced_penalty(g, b),
            GppPenalty::LowerBound => gpp_penalty_bound(g, b),
            GppPenalty::Explicit(a) => a,
        }
    }
}

/// `A (Σ x_i - |V|/2)² + B Σ_{(u,v)∈E} (x_u + x_v - 2 x_u x_v)`.
///
/// Odd `|V|` is accepted; the balance term then uses the half-integer target
/// and no assignment is penalty-free.
pub fn build_gpp_qubo(g: &ProblemGraph, b: f64, penalty: GppPenalty) -> Result<Qubo> {
    let a = penalty.resolve(g, b);
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("cut weight B must be positive, got {b}")));
    }
    if !a.is_finite() || a < 0.0 || (a == 0.0 && g.edge_count() > 0) {
        return Err(Error::InvalidParameter(format!("balance weight A must be positive, got {a}")));
    }
    let n = g.node_count();
    let half = n as f64 / 2.0;
    let mut q = Qubo::new(n);
    q.set_offset(a * half * half);
    for i in 0..n {
        q.add_linear(i, a * (1.0 - n as f64));
        for j in i + 1..n {
            q.add_quadratic(i, j, 2.0 * a);
        }
    }
    for &(u, v) in g.edges() {
        q.add_linear(u, b);
        q.add_linear(v, b);
        q.add_quadratic(u, v, -2.0 * b);
    }
    Ok(q)
}

fn check_len(g: &ProblemGraph, x: &[u8]) -> Result<()> {
    if x.len() != g.node_count() {
        return Err(Error::Shape {
            expected: g.node_count(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Number of edges whose endpoints carry different labels.
pub fn cut_edges(g: &ProblemGraph, x: &[u8]) -> Result<usize> {
    check_len(g, x)?;
    Ok(g.edges().iter().filter(|&&(u, v)| x[u] != x[v]).count())
}

pub fn vertex_cover_valid(g: &ProblemGraph, x: &[u8]) -> Result<bool> {
    check_len(g, x)?;
    Ok(g.edges().iter().all(|&(u, v)| x[u] == 1 || x[v] == 1))
}

/// `Σ x_i = n / 2`.
pub fn partition_balanced(x: &[u8]) -> bool {
    2 * x.iter().map(|&b| b as usize).sum::<usize>() == x.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::gen_erdos_renyi;
    use crate::qubo::{brute_force_min, exact_ground_states};

    fn cycle4() -> ProblemGraph {
        ProblemGraph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn mvcp_examples() {
        let tri = ProblemGraph::complete(3);
        let q = build_mvcp_qubo(&tri, 2.0, 1.0).unwrap();
        assert_eq!(q.energy(&[1, 1, 0]).unwrap(), 2.0);
        // Oracle: every assignment of the triangle, by hand.
        let expected = [3.0 * 2.0, 3.0, 3.0, 2.0, 3.0, 2.0, 2.0, 3.0];
        for (k, e) in expected.iter().enumerate() {
            let x: Vec<u8> = (0..3).map(|i| ((k >> i) & 1) as u8).collect();
            let covered = tri.edges().iter().filter(|&&(u, v)| x[u] == 1 || x[v] == 1).count();
            let direct = 2.0 * (3 - covered) as f64 + x.iter().map(|&b| b as f64).sum::<f64>();
            assert_eq!(q.energy(&x).unwrap(), direct);
            assert_eq!(direct, *e, "assignment {x:?}");
        }
        assert_eq!(brute_force_min(&q).unwrap().1, 2.0);

        let edge = ProblemGraph::new(2, [(0, 1)]).unwrap();
        let q = build_mvcp_qubo(&edge, 2.0, 1.0).unwrap();
        assert_eq!(q.energy(&[0, 0]).unwrap(), 2.0);

        let empty = gen_erdos_renyi(4, 0.0, 1).unwrap();
        let q = build_mvcp_qubo(&empty, 5.0, 1.0).unwrap();
        assert_eq!(q.energy(&[0, 0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn mvcp_weight_order_enforced() {
        let tri = ProblemGraph::complete(3);
        assert!(matches!(build_mvcp_qubo(&tri, 1.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(build_mvcp_qubo(&tri, 1.0, 2.0).is_err());
        assert!(build_mvcp_qubo(&tri, 2.0, 0.0).is_err());
    }

    #[test]
    fn penalty_bound_examples() {
        assert_eq!(gpp_penalty_bound(&ProblemGraph::complete(10), 1.0), 1.25);
        assert_eq!(gpp_penalty_bound(&ProblemGraph::complete(3), 1.0), 0.375);
        assert_eq!(gpp_penalty_bound(&gen_erdos_renyi(6, 0.0, 0).unwrap(), 1.0), 0.0);
        assert_eq!(gpp_balanced_penalty(&ProblemGraph::complete(4), 1.0), 2.5);
    }

    #[test]
    fn gpp_examples() {
        let k4 = ProblemGraph::complete(4);
        let q = build_gpp_qubo(&k4, 1.0, GppPenalty::Explicit(1.0)).unwrap();
        assert_eq!(q.energy(&[1, 1, 0, 0]).unwrap(), 4.0);
        assert_eq!(q.energy(&[0, 0, 0, 0]).unwrap(), 4.0);
        assert_eq!(brute_force_min(&q).unwrap().1, 4.0);

        let c4 = cycle4();
        let q = build_gpp_qubo(&c4, 1.0, GppPenalty::Explicit(1.0)).unwrap();
        assert_eq!(q.energy(&[1, 1, 0, 0]).unwrap(), 2.0);
        for a in [0.5, 3.0] {
            let q = build_gpp_qubo(&c4, 1.0, GppPenalty::Explicit(a)).unwrap();
            assert_eq!(q.energy(&[0, 0, 0, 0]).unwrap(), 4.0 * a);
        }
    }

    #[test]
    fn published_bound_admits_unbalanced_minimizers() {
        // K4 with A = min(6, 4)/8 = 0.5: putting every vertex on one side pays
        // 0.5 * 2^2 = 2 and cuts nothing, beating every balanced split (4 cut edges).
        let k4 = ProblemGraph::complete(4);
        let q = build_gpp_qubo(&k4, 1.0, GppPenalty::LowerBound).unwrap();
        let (x, e) = brute_force_min(&q).unwrap();
        assert!(!partition_balanced(&x));
        assert_eq!(e, 2.0);

        let q = build_gpp_qubo(&k4, 1.0, GppPenalty::Balanced).unwrap();
        let ground = exact_ground_states(&q).unwrap();
        assert!(ground.states.iter().all(|x| partition_balanced(x)));
        assert_eq!(ground.energy, 4.0);
    }

    #[test]
    fn gpp_rejects_bad_weights() {
        let k4 = ProblemGraph::complete(4);
        assert!(build_gpp_qubo(&k4, 1.0, GppPenalty::Explicit(0.0)).is_err());
        assert!(build_gpp_qubo(&k4, 1.0, GppPenalty::Explicit(-1.0)).is_err());
        assert!(build_gpp_qubo(&k4, 0.0, GppPenalty::Explicit(1.0)).is_err());
        let empty = gen_erdos_renyi(4, 0.0, 0).unwrap();
        assert!(build_gpp_qubo(&empty, 1.0, GppPenalty::LowerBound).is_ok());
    }

    #[test]
    fn odd_graphs_penalize_every_assignment() {
        let tri = ProblemGraph::complete(3);
        let q = build_gpp_qubo(&tri, 1.0, GppPenalty::Explicit(1.0)).unwrap();
        let (_, e) = brute_force_min(&q).unwrap();
        // A 2|1 split (cut 2) and the empty side (cut 0, imbalance 3/2) tie.
        assert_eq!(e, 2.25);
    }

    #[test]
    fn solution_metrics() {
        let k4 = ProblemGraph::complete(4);
        assert_eq!(cut_edges(&k4, &[1, 1, 0, 0]).unwrap(), 4);
        assert!(partition_balanced(&[1, 1, 0, 0]));
        assert!(!partition_balanced(&[1, 1, 1, 0]));
        assert_eq!(cut_edges(&k4, &[1, 1, 1, 1]).unwrap(), 0);
        let tri = ProblemGraph::complete(3);
        assert!(vertex_cover_valid(&tri, &[1, 1, 0]).unwrap());
        assert!(!vertex_cover_valid(&tri, &[1, 0, 0]).unwrap());
        assert!(matches!(cut_edges(&tri, &[1, 0]), Err(Error::Shape { expected: 3, got: 2 })));
        assert!(vertex_cover_valid(&tri, &[1, 0, 0, 1]).is_err());
    }
}
