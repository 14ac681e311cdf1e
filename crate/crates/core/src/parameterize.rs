//! Chain strengths, embedded physical models and coefficient scaling for
//! per-instance (MTQA) and global (PQA) parameterization.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, ParallelPlan};
use crate::error::{Error, Result};
use crate::graphs::{degree_stats, ProblemGraph};
use crate::qubo::{qubo_to_ising, IsingModel, Qubo};
use crate::topology::{HardwareGraph, QubitId};

pub const DEFAULT_UTC_PREFACTOR: f64 = 0.5;
pub const DEFAULT_SCALED_PREFACTOR: f64 = 1.5;
pub const DEFAULT_H_MAX: f64 = 4.0;
pub const DEFAULT_J_MAX: f64 = 1.0;

/// Which pair coefficients the RMS in the UTC rule runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplerBasis {
    #[default]
    Ising,
    Qubo,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.filter(|v| *v != 0.0).fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// `prefactor * rms(J) * sqrt(avg_degree(g))` over the nonzero logical
/// couplers of `m`.
pub fn chain_strength_utc(m: &IsingModel, g: &ProblemGraph, prefactor: f64) -> f64 {
    let (_, avg_degree) = degree_stats(g);
    prefactor * rms(m.j().values().copied()) * avg_degree.sqrt()
}

/// Same rule with the RMS over the pair terms of the logical QUBO.
pub fn chain_strength_utc_qubo(q: &Qubo, g: &ProblemGraph, prefactor: f64) -> f64 {
    let (_, avg_degree) = degree_stats(g);
    prefactor * rms(q.quadratic().values().copied()) * avg_degree.sqrt()
}

/// `prefactor * max(max|h|, max|J|)`.
pub fn chain_strength_scaled(m: &IsingModel, prefactor: f64) -> f64 {
    prefactor * m.max_abs_linear().max(m.max_abs_quadratic())
}

/// A logical model placed on hardware qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedIsing {
    /// Indexed by hardware qubit id.
    pub model: IsingModel,
    /// Ferromagnetic spanning-tree couplers, one list per chain.
    pub chain_couplers: Vec<Vec<(QubitId, QubitId)>>,
    /// Energy of the chain couplers when every chain is unanimous.
    pub chain_energy: f64,
}

/// Map a logical Ising model onto `e`: linear terms split evenly over the
/// chain, each logical coupler on the lowest-id physical coupler between the
/// two chains, and `-chain_strength` on a breadth-first spanning tree of
/// every chain (lowest ids first).
pub fn embed_ising(m: &IsingModel, e: &Embedding, h: &HardwareGraph, chain_strength: f64) -> Result<EmbeddedIsing> {
    if e.node_count() != m.size() {
        return Err(Error::EmbeddingInvalid(format!(
            "embedding has {} chains for a model of size {}",
            e.node_count(),
            m.size()
        )));
    }
    let mut p = IsingModel::new(h.qubit_count());
    p.set_offset(m.offset());
    for (v, chain) in e.chains().iter().enumerate() {
        if chain.is_empty() {
            return Err(Error::EmbeddingInvalid(format!("chain of node {v} is empty")));
        }
        if let Some(&q) = chain.iter().find(|&&q| q >= h.qubit_count() || !h.is_active(q)) {
            return Err(Error::EmbeddingInvalid(format!("chain of node {v} uses unavailable qubit {q}")));
        }
        let share = m.linear_at(v) / chain.len() as f64;
        for &q in chain {
            p.add_linear(q, share);
        }
    }
    for (&(i, j), &w) in m.j() {
        if w == 0.0 {
            continue;
        }
        let (a, b) = lowest_coupler(h, e.chain(i), e.chain(j)).ok_or_else(|| {
            Error::EmbeddingInvalid(format!("no coupler between the chains of logical edge ({i}, {j})"))
        })?;
        p.add_quadratic(a, b, w);
    }
    let mut chain_couplers = Vec::with_capacity(e.node_count());
    let mut edges = 0usize;
    for (v, chain) in e.chains().iter().enumerate() {
        let tree = spanning_tree(h, chain)
            .ok_or_else(|| Error::EmbeddingInvalid(format!("chain of node {v} is not connected")))?;
        for &(a, b) in &tree {
            p.add_quadratic(a, b, -chain_strength);
        }
        edges += tree.len();
        chain_couplers.push(tree);
    }
    Ok(EmbeddedIsing {
        model: p,
        chain_couplers,
        chain_energy: -chain_strength * edges as f64,
    })
}

fn lowest_coupler(h: &HardwareGraph, from: &[QubitId], to: &[QubitId]) -> Option<(QubitId, QubitId)> {
    let to: BTreeSet<QubitId> = to.iter().copied().collect();
    from.iter()
        .flat_map(|&a| h.active_neighbors(a).filter(|b| to.contains(b)).map(move |b| (a.min(b), a.max(b))))
        .min()
}

fn spanning_tree(h: &HardwareGraph, chain: &[QubitId]) -> Option<Vec<(QubitId, QubitId)>> {
    let members: BTreeSet<QubitId> = chain.iter().copied().collect();
    let start = *members.first()?;
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut tree = Vec::new();
    while let Some(x) = queue.pop_front() {
        // `neighbors` is sorted, so lower ids are attached first.
        for &y in h.neighbors(x) {
            if members.contains(&y) && h.is_active(y) && seen.insert(y) {
                tree.push((x.min(y), x.max(y)));
                queue.push_back(y);
            }
        }
    }
    (seen.len() == members.len()).then_some(tree)
}

/// Divide by `d = max(1, max|h| / h_max, max|J| / j_max)`.
pub fn scale_instance(p: &IsingModel, h_max: f64, j_max: f64) -> Result<(IsingModel, f64)> {
    let d = scale_factor(p, h_max, j_max)?;
    Ok((if d == 1.0 { p.clone() } else { p.scaled(1.0 / d) }, d))
}

fn scale_factor(p: &IsingModel, h_max: f64, j_max: f64) -> Result<f64> {
    if !(h_max > 0.0 && j_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coefficient ranges must be positive, got h_max={h_max}, j_max={j_max}"
        )));
    }
    Ok(1f64.max(p.max_abs_linear() / h_max).max(p.max_abs_quadratic() / j_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mvcp,
    Gpp,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Mvcp => "mvcp",
            ProblemKind::Gpp => "gpp",
        })
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvcp" => Ok(ProblemKind::Mvcp),
            "gpp" => Ok(ProblemKind::Gpp),
            _ => Err(Error::Config(format!("unknown problem kind `{s}`; expected mvcp or gpp"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChainRule {
    Utc { prefactor: f64 },
    Scaled { prefactor: f64 },
}

/// A logical instance ready for parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalProblem {
    pub kind: ProblemKind,
    pub graph: ProblemGraph,
    pub qubo: Qubo,
    pub ising: IsingModel,
}

impl LogicalProblem {
    pub fn new(kind: ProblemKind, graph: ProblemGraph, qubo: Qubo) -> Self {
        let ising = qubo_to_ising(&qubo);
        LogicalProblem { kind, graph, qubo, ising }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamConfig {
    pub rules: BTreeMap<ProblemKind, ChainRule>,
    pub basis: CouplerBasis,
    pub h_max: f64,
    pub j_max: f64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            rules: BTreeMap::from([
                (ProblemKind::Mvcp, ChainRule::Utc { prefactor: DEFAULT_UTC_PREFACTOR }),
                (ProblemKind::Gpp, ChainRule::Scaled { prefactor: DEFAULT_SCALED_PREFACTOR }),
            ]),
            basis: CouplerBasis::Ising,
            h_max: DEFAULT_H_MAX,
            j_max: DEFAULT_J_MAX,
        }
    }
}

impl ParamConfig {
    pub fn chain_strength(&self, p: &LogicalProblem) -> Result<f64> {
        let rule = self
            .rules
            .get(&p.kind)
            .ok_or_else(|| Error::Config(format!("no chain-strength rule for problem kind `{}`", p.kind)))?;
        Ok(match *rule {
            ChainRule::Utc { prefactor } => match self.basis {
                CouplerBasis::Ising => chain_strength_utc(&p.ising, &p.graph, prefactor),
                CouplerBasis::Qubo => chain_strength_utc_qubo(&p.qubo, &p.graph, prefactor),
            },
            ChainRule::Scaled { prefactor } => chain_strength_scaled(&p.ising, prefactor),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMode {
    Mtqa,
    Pqa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedInstance {
    /// Position of the instance in the plan.
    pub entry: usize,
    pub problem_id: usize,
    /// Scaled physical model over hardware qubit ids.
    pub physical: IsingModel,
    pub chain_strength: f64,
    pub scale_factor: f64,
    /// Scaled energy of the chain couplers when every chain is unanimous.
    pub chain_energy: f64,
    pub embedding: Embedding,
}

impl EmbeddedInstance {
    /// Qubits used by this instance, ascending.
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut q: Vec<QubitId> = self.embedding.qubits().collect();
        q.sort_unstable();
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedProgram {
    pub mode: ParamMode,
    pub instances: Vec<EmbeddedInstance>,
    /// Disjoint union of the instance models.
    pub combined: IsingModel,
    pub hardware_ref: String,
}

impl ComposedProgram {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn logical<'a>(problems: &'a [LogicalProblem], id: usize) -> Result<&'a LogicalProblem> {
    problems
        .get(id)
        .ok_or_else(|| Error::InvalidArgument(format!("plan refers to problem {id}, only {} given", problems.len())))
}

fn union(size: usize, models: impl IntoIterator<Item = IsingModel>) -> IsingModel {
    let mut combined = IsingModel::new(size);
    for m in models {
        combined.add_offset(m.offset());
        for (&i, &v) in m.h() {
            combined.add_linear(i, v);
        }
        for (&(i, j), &v) in m.j() {
            combined.add_quadratic(i, j, v);
        }
    }
    combined
}

/// Per-instance chain strength and scaling.
pub fn compose_mtqa(plan: &ParallelPlan, problems: &[LogicalProblem], h: &HardwareGraph, cfg: &ParamConfig) -> Result<ComposedProgram> {
    let mut instances = Vec::with_capacity(plan.len());
    for (entry, pe) in plan.entries.iter().enumerate() {
        let p = logical(problems, pe.problem_id)?;
        let cs = cfg.chain_strength(p)?;
        let emb = embed_ising(&p.ising, &pe.embedding, h, cs)?;
        let (physical, d) = scale_instance(&emb.model, cfg.h_max, cfg.j_max)?;
        instances.push(EmbeddedInstance {
            entry,
            problem_id: pe.problem_id,
            physical,
            chain_strength: cs,
            scale_factor: d,
            chain_energy: emb.chain_energy / d,
            embedding: pe.embedding.clone(),
        });
    }
    Ok(finish(ParamMode::Mtqa, instances, plan, h))
}

/// One chain strength (the mean of the per-instance values) and one scale
/// factor for the whole program.
pub fn compose_pqa(plan: &ParallelPlan, problems: &[LogicalProblem], h: &HardwareGraph, cfg: &ParamConfig) -> Result<ComposedProgram> {
    let mut strengths = Vec::with_capacity(plan.len());
    for pe in &plan.entries {
        strengths.push(cfg.chain_strength(logical(problems, pe.problem_id)?)?);
    }
    let cs = if strengths.is_empty() {
        0.0
    } else {
        strengths.iter().sum::<f64>() / strengths.len() as f64
    };
    let mut embedded = Vec::with_capacity(plan.len());
    for pe in &plan.entries {
        embedded.push(embed_ising(&logical(problems, pe.problem_id)?.ising, &pe.embedding, h, cs)?);
    }
    let raw = union(h.qubit_count(), embedded.iter().map(|e| e.model.clone()));
    let d = scale_factor(&raw, cfg.h_max, cfg.j_max)?;
    let instances = plan
        .entries
        .iter()
        .zip(embedded)
        .enumerate()
        .map(|(entry, (pe, emb))| EmbeddedInstance {
            entry,
            problem_id: pe.problem_id,
            physical: emb.model.scaled(1.0 / d),
            chain_strength: cs,
            scale_factor: d,
            chain_energy: emb.chain_energy / d,
            embedding: pe.embedding.clone(),
        })
        .collect();
    Ok(finish(ParamMode::Pqa, instances, plan, h))
}

fn finish(mode: ParamMode, instances: Vec<EmbeddedInstance>, plan: &ParallelPlan, h: &HardwareGraph) -> ComposedProgram {
    let combined = union(h.qubit_count(), instances.iter().map(|i| i.physical.clone()));
    ComposedProgram {
        mode,
        instances,
        combined,
        hardware_ref: plan.hardware_ref.clone(),
    }
}

/// Restrict a model to the variables in `vars` (ascending), renumbered
/// `0..vars.len()`. Terms touching other variables are dropped.
pub fn restrict(m: &IsingModel, vars: &[usize]) -> IsingModel {
    let index: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut r = IsingModel::new(vars.len());
    r.set_offset(m.offset());
    for (i, &v) in m.h() {
        if let Some(&k) = index.get(i) {
            r.add_linear(k, v);
        }
    }
    for ((i, j), &v) in m.j() {
        if let (Some(&a), Some(&b)) = (index.get(i), index.get(j)) {
            r.add_quadratic(a, b, v);
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{find_embedding, EmbedConfig, PlanEntry};
    use crate::graphs::gen_erdos_renyi;
    use crate::qubo::{build_gpp_qubo, build_mvcp_qubo, exact_ground_states, GppPenalty};
    use crate::topology::gen_chimera;
    use proptest::prelude::*;

    fn cycle(n: usize) -> ProblemGraph {
        ProblemGraph::new(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn utc_constant_couplers_on_regular_graph() {
        let g = cycle(5);
        let mut m = IsingModel::new(5);
        for &(a, b) in g.edges() {
            m.add_quadratic(a, b, -0.75);
        }
        let expected = 0.5 * 0.75 * 2f64.sqrt();
        assert!((chain_strength_utc(&m, &g, 0.5) - expected).abs() < 1e-12);
        assert_eq!(chain_strength_utc(&IsingModel::new(5), &g, 0.5), 0.0);
    }

    #[test]
    fn utc_worked_example() {
        let g = cycle(4);
        let mut m = IsingModel::new(4);
        m.add_quadratic(0, 1, 3.0);
        m.add_quadratic(1, 2, 4.0);
        assert!((chain_strength_utc(&m, &g, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn utc_qubo_basis_uses_qubo_pairs() {
        let g = cycle(4);
        let mut q = Qubo::new(4);
        q.add_quadratic(0, 1, 4.0);
        q.add_linear(0, 9.0);
        assert!((chain_strength_utc_qubo(&q, &g, 0.5) - 0.5 * 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scaled_examples() {
        let mut m = IsingModel::new(2);
        m.add_linear(0, -2.0);
        m.add_quadratic(0, 1, 1.0);
        assert!((chain_strength_scaled(&m, 1.5) - 3.0).abs() < 1e-12);
        assert_eq!(chain_strength_scaled(&IsingModel::new(3), 1.5), 0.0);
    }

    fn identity_embedding(n: usize) -> Embedding {
        Embedding::new((0..n).map(|v| vec![v]).collect())
    }

    #[test]
    fn singleton_chains_reproduce_the_logical_model() {
        let h = gen_chimera(1, 1, 4).unwrap();
        // Nodes 0..3 on one side, 4.. on the other: a 4-cycle 0-4-1-5.
        let mut m = IsingModel::new(2);
        m.add_linear(0, 0.5);
        m.add_linear(1, -1.0);
        m.add_quadratic(0, 1, 2.0);
        m.set_offset(0.25);
        let e = Embedding::new(vec![vec![0], vec![4]]);
        let p = embed_ising(&m, &e, &h, 7.0).unwrap();
        assert_eq!(p.model.linear_at(0), 0.5);
        assert_eq!(p.model.linear_at(4), -1.0);
        assert_eq!(p.model.quadratic_at(0, 4), 2.0);
        assert_eq!(p.model.j().len(), 1);
        assert_eq!(p.model.offset(), 0.25);
        assert_eq!(p.chain_energy, 0.0);
    }

    #[test]
    fn two_qubit_chain_splits_bias() {
        let h = gen_chimera(1, 1, 4).unwrap();
        let mut m = IsingModel::new(1);
        m.add_linear(0, 1.0);
        let e = Embedding::new(vec![vec![0, 4]]);
        let p = embed_ising(&m, &e, &h, 2.0).unwrap();
        assert_eq!(p.model.linear_at(0), 0.5);
        assert_eq!(p.model.linear_at(4), 0.5);
        assert_eq!(p.model.quadratic_at(0, 4), -2.0);
        assert_eq!(p.chain_couplers, vec![vec![(0, 4)]]);
        assert_eq!(p.chain_energy, -2.0);
    }

    #[test]
    fn logical_coupler_goes_to_lowest_pair() {
        let h = gen_chimera(1, 1, 4).unwrap();
        let mut m = IsingModel::new(2);
        m.add_quadratic(0, 1, 1.0);
        let e = Embedding::new(vec![vec![1, 2], vec![5, 6]]);
        // Chains {1,2} and {5,6} are not internally connected (same side).
        assert!(matches!(embed_ising(&m, &e, &h, 1.0), Err(Error::EmbeddingInvalid(_))));
        let e = Embedding::new(vec![vec![1, 5], vec![2, 6]]);
        let p = embed_ising(&m, &e, &h, 1.0).unwrap();
        assert_eq!(p.model.quadratic_at(1, 6), 1.0);
        assert_eq!(p.model.quadratic_at(2, 5), 0.0);
    }

    #[test]
    fn missing_inter_chain_coupler_is_an_error() {
        let h = gen_chimera(1, 1, 4).unwrap();
        let mut m = IsingModel::new(2);
        m.add_quadratic(0, 1, 1.0);
        let e = Embedding::new(vec![vec![0], vec![1]]);
        assert!(matches!(embed_ising(&m, &e, &h, 1.0), Err(Error::EmbeddingInvalid(_))));
    }

    #[test]
    fn scaling_examples() {
        let mut m = IsingModel::new(2);
        m.add_linear(0, 2.0);
        m.add_quadratic(0, 1, 0.5);
        let (s, d) = scale_instance(&m, 4.0, 1.0).unwrap();
        assert_eq!((s, d), (m.clone(), 1.0));
        m.add_quadratic(0, 1, 2.5);
        let (s, d) = scale_instance(&m, 4.0, 1.0).unwrap();
        assert_eq!(d, 3.0);
        assert!((s.quadratic_at(0, 1) - 1.0).abs() < 1e-15);
        assert!(scale_instance(&m, 0.0, 1.0).is_err());
    }

    fn spins(k: u64, n: usize) -> Vec<i8> {
        (0..n).map(|i| if (k >> i) & 1 == 1 { 1 } else { -1 }).collect()
    }

    fn random_model(n: usize, seed: u64) -> IsingModel {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed);
        let g = gen_erdos_renyi(n, 0.6, seed).unwrap();
        let mut m = IsingModel::new(n);
        for i in 0..n {
            m.add_linear(i, rng.random_range(-2.0..2.0));
        }
        for &(a, b) in g.edges() {
            m.add_quadratic(a, b, rng.random_range(-3.0..3.0));
        }
        m.set_offset(rng.random_range(-1.0..1.0));
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scaled_rule_is_homogeneous(seed in 0u64..1000, lambda in 0.01f64..50.0) {
            let m = random_model(5, seed);
            let a = chain_strength_scaled(&m.scaled(lambda), 1.5);
            let b = lambda * chain_strength_scaled(&m, 1.5);
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn unanimous_states_collapse_to_logical_energy(seed in 0u64..1000, n in 2usize..7) {
            let m = random_model(n, seed);
            let h = gen_chimera(2, 2, 4).unwrap();
            let e = find_embedding(&m.interaction_graph().unwrap(), &h, seed, &EmbedConfig { timeout_ms: 0, ..Default::default() })
                .unwrap()
                .expect("small models fit");
            let p = embed_ising(&m, &e, &h, 1.7).unwrap();
            for k in 0..1u64 << n {
                let s = spins(k, n);
                let mut phys = vec![1i8; h.qubit_count()];
                for (v, chain) in e.chains().iter().enumerate() {
                    for &q in chain {
                        phys[q] = s[v];
                    }
                }
                let lhs = p.model.energy(&phys).unwrap();
                let rhs = m.energy(&s).unwrap() + p.chain_energy;
                prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            }
        }

        #[test]
        fn scaling_preserves_ground_states(seed in 0u64..1000, n in 1usize..=12) {
            let m = random_model(n, seed).scaled(3.0);
            let (s, d) = scale_instance(&m, 4.0, 1.0).unwrap();
            prop_assert!(d >= 1.0);
            prop_assert!(s.max_abs_linear() <= 4.0 + 1e-12 && s.max_abs_quadratic() <= 1.0 + 1e-12);
            prop_assert_eq!(exact_ground_states(&m).unwrap().states, exact_ground_states(&s).unwrap().states);
        }
    }

    fn mvcp(n: usize, p: f64, seed: u64) -> LogicalProblem {
        let g = gen_erdos_renyi(n, p, seed).unwrap();
        let q = build_mvcp_qubo(&g, 2.0, 1.0).unwrap();
        LogicalProblem::new(ProblemKind::Mvcp, g, q)
    }

    fn plan_for(problems: &[LogicalProblem], h: &HardwareGraph, seed: u64) -> ParallelPlan {
        let graphs: Vec<ProblemGraph> = problems.iter().map(|p| p.ising.interaction_graph().unwrap()).collect();
        let cfg = EmbedConfig { timeout_ms: 0, ..Default::default() };
        let mut work = h.clone();
        let mut entries = Vec::new();
        for (i, g) in graphs.iter().enumerate() {
            let e = find_embedding(g, &work, seed + i as u64, &cfg).unwrap().unwrap();
            work = work.remove_nodes(&e.qubits().collect()).unwrap();
            entries.push(PlanEntry { problem_id: i, embedding: e });
        }
        ParallelPlan { entries, isolation: false, hardware_ref: "test".into() }
    }

    #[test]
    fn mtqa_strength_depends_only_on_the_logical_instance() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let p = mvcp(6, 0.7, 3);
        let problems = vec![p.clone(), p];
        let plan = plan_for(&problems, &h, 11);
        let prog = compose_mtqa(&plan, &problems, &h, &ParamConfig::default()).unwrap();
        assert_eq!(prog.instances[0].chain_strength, prog.instances[1].chain_strength);
        let q0: BTreeSet<_> = prog.instances[0].qubits().into_iter().collect();
        assert!(prog.instances[1].qubits().iter().all(|q| !q0.contains(q)));
        // No term of the combined model crosses instances.
        let owner: BTreeMap<QubitId, usize> = prog
            .instances
            .iter()
            .flat_map(|i| i.qubits().into_iter().map(move |q| (q, i.entry)))
            .collect();
        for &(a, b) in prog.combined.j().keys() {
            assert_eq!(owner[&a], owner[&b]);
        }
    }

    #[test]
    fn single_entry_program_is_the_instance() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let problems = vec![mvcp(5, 0.8, 1)];
        let plan = plan_for(&problems, &h, 2);
        let prog = compose_mtqa(&plan, &problems, &h, &ParamConfig::default()).unwrap();
        assert_eq!(prog.combined, prog.instances[0].physical);
        let back = ComposedProgram::from_json(&prog.to_json()).unwrap();
        assert_eq!(back, prog);
    }

    #[test]
    fn missing_rule_is_a_config_error() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let problems = vec![mvcp(5, 0.8, 1)];
        let plan = plan_for(&problems, &h, 2);
        let mut cfg = ParamConfig::default();
        cfg.rules.remove(&ProblemKind::Mvcp);
        assert!(matches!(compose_mtqa(&plan, &problems, &h, &cfg), Err(Error::Config(_))));
        assert!(matches!(compose_pqa(&plan, &problems, &h, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn pqa_equals_mtqa_for_identical_instances() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let p = mvcp(5, 0.8, 4);
        let problems = vec![p.clone(), p.clone(), p];
        // Same chain shapes so per-instance scale factors agree.
        let base = find_embedding(&problems[0].ising.interaction_graph().unwrap(), &gen_chimera(1, 1, 4).unwrap(), 0, &EmbedConfig::default())
            .unwrap()
            .unwrap();
        let entries = (0..3)
            .map(|k| PlanEntry {
                problem_id: k,
                embedding: Embedding::new(base.chains().iter().map(|c| c.iter().map(|q| q + 8 * k).collect()).collect()),
            })
            .collect();
        let plan = ParallelPlan { entries, isolation: false, hardware_ref: "test".into() };
        let cfg = ParamConfig::default();
        let a = compose_mtqa(&plan, &problems, &h, &cfg).unwrap();
        let b = compose_pqa(&plan, &problems, &h, &cfg).unwrap();
        assert_eq!(a.combined, b.combined);
    }

    #[test]
    fn pqa_shrinks_the_small_instance() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let small = mvcp(6, 0.6, 8);
        let g = gen_erdos_renyi(6, 0.6, 9).unwrap();
        let big_q = build_gpp_qubo(&g, 1.0, GppPenalty::Balanced).unwrap().scaled(10.0);
        let big = LogicalProblem::new(ProblemKind::Gpp, g, big_q);
        let problems = vec![small, big];
        let plan = plan_for(&problems, &h, 5);
        let cfg = ParamConfig::default();
        let a = compose_mtqa(&plan, &problems, &h, &cfg).unwrap();
        let b = compose_pqa(&plan, &problems, &h, &cfg).unwrap();
        assert_eq!(b.instances[0].chain_strength, b.instances[1].chain_strength);
        assert_eq!(b.instances[0].scale_factor, b.instances[1].scale_factor);
        let shrink = b.instances[0].scale_factor / a.instances[0].scale_factor;
        assert!(shrink >= 5.0, "shrink {shrink}");
    }

    #[test]
    fn restrict_renumbers() {
        let mut m = IsingModel::new(10);
        m.add_linear(3, 1.0);
        m.add_linear(5, 2.0);
        m.add_quadratic(3, 7, -1.0);
        m.add_quadratic(3, 5, 4.0);
        let r = restrict(&m, &[3, 5]);
        assert_eq!(r.size(), 2);
        assert_eq!(r.linear_at(0), 1.0);
        assert_eq!(r.quadratic_at(0, 1), 4.0);
        assert_eq!(r.j().len(), 1);
    }

    #[test]
    fn identity_embedding_helper_matches_singletons() {
        let e = identity_embedding(3);
        assert_eq!(e.chains(), &[vec![0], vec![1], vec![2]]);
    }
}
