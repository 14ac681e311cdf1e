//! Packing many embeddings onto one device, plan validation, chain
//! statistics and the plan text format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{find_embedding, EmbedConfig, Embedding};
use crate::error::{Error, Result};
use crate::graphs::ProblemGraph;
use crate::seed;
use crate::topology::{HardwareGraph, QubitId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// Index into the problem list the plan was built from.
    pub problem_id: usize,
    pub embedding: Embedding,
}

/// Embeddings in the order they were found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPlan {
    pub entries: Vec<PlanEntry>,
    pub isolation: bool,
    /// Label or file path of the hardware graph the plan targets.
    pub hardware_ref: String,
}

impl ParallelPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries per problem id.
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.problem_id).or_insert(0) += 1;
        }
        out
    }
}

/// Sweep the problem list repeatedly, embedding each problem into what is
/// left of the hardware. After every success the chain qubits (and, with
/// isolation, their neighbors) are removed. Stops after a sweep in which
/// nothing was embedded.
pub fn parallel_embedding_search(
    problems: &[ProblemGraph],
    h: &HardwareGraph,
    isolation: bool,
    seed: u64,
    cfg: &EmbedConfig,
) -> Result<ParallelPlan> {
    let mut work = h.clone();
    let mut entries = Vec::new();
    let mut attempt = 0u64;
    loop {
        let mut found = false;
        for (problem_id, p) in problems.iter().enumerate() {
            if work.effective_count() == 0 {
                break;
            }
            let embedding = find_embedding(p, &work, seed::derive(seed, attempt), cfg)?;
            attempt += 1;
            if let Some(embedding) = embedding {
                let used: BTreeSet<QubitId> = embedding.qubits().collect();
                work = if isolation {
                    work.remove_nodes_and_neighbors(&used)?
                } else {
                    work.remove_nodes(&used)?
                };
                entries.push(PlanEntry { problem_id, embedding });
                found = true;
            }
        }
        if !found {
            break;
        }
    }
    Ok(ParallelPlan {
        entries,
        isolation,
        hardware_ref: format!("{} ({} qubits)", h.family(), h.qubit_count()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("entry {entry} refers to unknown problem {problem_id}")]
    UnknownProblem { entry: usize, problem_id: usize },
    #[error("entry {entry} has {got} chains for a {expected}-node problem")]
    NodeCount { entry: usize, expected: usize, got: usize },
    #[error("entry {entry} node {node} has an empty chain")]
    EmptyChain { entry: usize, node: usize },
    #[error("entry {entry} node {node} uses qubit {qubit}, which is not an enabled qubit")]
    UnavailableQubit { entry: usize, node: usize, qubit: QubitId },
    #[error("entry {entry} node {node} has a disconnected chain")]
    DisconnectedChain { entry: usize, node: usize },
    #[error("entry {entry} has no coupler for logical edge ({}, {})", .edge.0, .edge.1)]
    MissingCoupler { entry: usize, edge: (usize, usize) },
    #[error("qubit {qubit} is shared by entry {} node {} and entry {} node {}", .first.0, .first.1, .second.0, .second.1)]
    SharedQubit {
        qubit: QubitId,
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("coupler ({}, {}) joins entries {} and {} of an isolated plan", .coupler.0, .coupler.1, .entries.0, .entries.1)]
    AdjacentInstances {
        coupler: (QubitId, QubitId),
        entries: (usize, usize),
    },
}

/// Check one embedding of `source` against the effective graph of `h`.
pub fn validate_embedding(source: &ProblemGraph, e: &Embedding, h: &HardwareGraph) -> Result<(), PlanViolation> {
    check_entry(0, source, e, h, &mut BTreeMap::new())
}

fn check_entry(
    entry: usize,
    source: &ProblemGraph,
    e: &Embedding,
    h: &HardwareGraph,
    owner: &mut BTreeMap<QubitId, (usize, usize)>,
) -> Result<(), PlanViolation> {
    if e.node_count() != source.node_count() {
        return Err(PlanViolation::NodeCount {
            entry,
            expected: source.node_count(),
            got: e.node_count(),
        });
    }
    for (node, chain) in e.chains().iter().enumerate() {
        if chain.is_empty() {
            return Err(PlanViolation::EmptyChain { entry, node });
        }
        for &qubit in chain {
            if !h.is_active(qubit) {
                return Err(PlanViolation::UnavailableQubit { entry, node, qubit });
            }
            if let Some(&first) = owner.get(&qubit) {
                return Err(PlanViolation::SharedQubit {
                    qubit,
                    first,
                    second: (entry, node),
                });
            }
            owner.insert(qubit, (entry, node));
        }
        if !connected(chain, h) {
            return Err(PlanViolation::DisconnectedChain { entry, node });
        }
    }
    for &(u, v) in source.edges() {
        let linked = e
            .chain(u)
            .iter()
            .any(|&a| e.chain(v).iter().any(|&b| h.has_coupler(a, b)));
        if !linked {
            return Err(PlanViolation::MissingCoupler { entry, edge: (u, v) });
        }
    }
    Ok(())
}

fn connected(chain: &[QubitId], h: &HardwareGraph) -> bool {
    let mut seen = vec![false; chain.len()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for (j, &q) in chain.iter().enumerate() {
            if !seen[j] && h.has_coupler(chain[i], q) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Check every chain, cross-entry disjointness and, for isolated plans,
/// that no coupler of `h` joins two different entries. Reports the first
/// violation found.
pub fn validate_plan(plan: &ParallelPlan, problems: &[ProblemGraph], h: &HardwareGraph) -> Result<(), PlanViolation> {
    let mut owner = BTreeMap::new();
    for (entry, pe) in plan.entries.iter().enumerate() {
        let source = problems.get(pe.problem_id).ok_or(PlanViolation::UnknownProblem {
            entry,
            problem_id: pe.problem_id,
        })?;
        check_entry(entry, source, &pe.embedding, h, &mut owner)?;
    }
    if plan.isolation {
        for &(a, b) in h.couplers() {
            if let (Some(&(ea, _)), Some(&(eb, _))) = (owner.get(&a), owner.get(&b)) {
                if ea != eb {
                    return Err(PlanViolation::AdjacentInstances {
                        coupler: (a, b),
                        entries: (ea.min(eb), ea.max(eb)),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Mean, population standard deviation and maximum of chain lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub max: usize,
}

impl Summary {
    fn of(lengths: &[usize]) -> Summary {
        let n = lengths.len() as f64;
        let mean = lengths.iter().sum::<usize>() as f64 / n;
        let var = lengths.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
        Summary {
            mean,
            sd: var.sqrt(),
            max: lengths.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub per_entry: Vec<Summary>,
    /// Over every logical node of every entry.
    pub aggregate: Summary,
}

pub fn chain_stats(plan: &ParallelPlan) -> Result<ChainStats> {
    let lengths = |e: &PlanEntry| e.embedding.chains().iter().map(Vec::len).collect::<Vec<_>>();
    let all: Vec<usize> = plan.entries.iter().flat_map(lengths).collect();
    if all.is_empty() {
        return Err(Error::InvalidArgument("chain statistics of an empty plan".into()));
    }
    Ok(ChainStats {
        per_entry: plan.entries.iter().map(|e| Summary::of(&lengths(e))).collect(),
        aggregate: Summary::of(&all),
    })
}

pub fn plan_to_string(plan: &ParallelPlan) -> String {
    let mut out = String::new();
    writeln!(out, "isolation {}", plan.isolation).unwrap();
    writeln!(out, "hardware {}", plan.hardware_ref).unwrap();
    for (i, e) in plan.entries.iter().enumerate() {
        writeln!(out, "entry {i} problem {}", e.problem_id).unwrap();
        for (v, chain) in e.embedding.chains().iter().enumerate() {
            let ids: Vec<String> = chain.iter().map(ToString::to_string).collect();
            writeln!(out, "{v}: [{}]", ids.join(", ")).unwrap();
        }
    }
    out
}

pub fn parse_plan(text: &str) -> Result<ParallelPlan> {
    let mut isolation = None;
    let mut hardware_ref = None;
    let mut entries: Vec<(usize, Vec<Vec<QubitId>>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(v) = t.strip_prefix("isolation ") {
            isolation = Some(
                v.trim()
                    .parse::<bool>()
                    .map_err(|_| Error::parse(line, format!("bad isolation flag `{v}`")))?,
            );
        } else if let Some(v) = t.strip_prefix("hardware ") {
            hardware_ref = Some(v.trim().to_string());
        } else if let Some(rest) = t.strip_prefix("entry ") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let (index, problem) = match fields.as_slice() {
                [i, "problem", p] => (i.parse::<usize>().ok(), p.parse::<usize>().ok()),
                _ => (None, None),
            };
            match (index, problem) {
                (Some(i), Some(p)) if i == entries.len() => entries.push((p, Vec::new())),
                _ => return Err(Error::parse(line, format!("bad entry header `{t}`"))),
            }
        } else if let Some((node, chain)) = t.split_once(':') {
            let Some((_, chains)) = entries.last_mut() else {
                return Err(Error::parse(line, "chain line before any entry"));
            };
            let node: usize = node
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad logical node `{node}`")))?;
            if node != chains.len() {
                return Err(Error::parse(line, format!("expected chain for node {}, got {node}", chains.len())));
            }
            let inner = chain
                .trim()
                .strip_prefix('[')
                .and_then(|c| c.strip_suffix(']'))
                .ok_or_else(|| Error::parse(line, "chain must be written as `[q, ...]`"))?;
            let qubits = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<QubitId>().map_err(|_| Error::parse(line, format!("bad qubit id `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            chains.push(qubits);
        } else {
            return Err(Error::parse(line, format!("unrecognized line `{t}`")));
        }
    }
    Ok(ParallelPlan {
        entries: entries
            .into_iter()
            .map(|(problem_id, chains)| PlanEntry {
                problem_id,
                embedding: Embedding::new(chains),
            })
            .collect(),
        isolation: isolation.ok_or_else(|| Error::parse(1, "missing `isolation` line"))?,
        hardware_ref: hardware_ref.ok_or_else(|| Error::parse(1, "missing `hardware` line"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::gen_chimera;

    fn entry(problem_id: usize, chains: Vec<Vec<QubitId>>) -> PlanEntry {
        PlanEntry {
            problem_id,
            embedding: Embedding::new(chains),
        }
    }

    fn plan(entries: Vec<PlanEntry>, isolation: bool) -> ParallelPlan {
        ParallelPlan {
            entries,
            isolation,
            hardware_ref: "test".into(),
        }
    }

    #[test]
    fn empty_problem_list_gives_empty_plan() {
        let h = gen_chimera(2, 2, 4).unwrap();
        let p = parallel_embedding_search(&[], &h, true, 0, &EmbedConfig::default()).unwrap();
        assert!(p.is_empty());
        assert!(chain_stats(&p).is_err());
    }

    #[test]
    fn second_problem_does_not_fit_after_first() {
        // A 3-qubit path holds one 3-node path problem and nothing else.
        let h = HardwareGraph::new(3, [(0, 1), (1, 2)], "file").unwrap();
        let a = ProblemGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let b = ProblemGraph::new(2, [(0, 1)]).unwrap();
        let problems = [a, b];
        let p = parallel_embedding_search(&problems, &h, false, 5, &EmbedConfig::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.entries[0].problem_id, 0);
        validate_plan(&p, &problems, &h).unwrap();
    }

    #[test]
    fn packs_triangles_with_and_without_isolation() {
        let h = gen_chimera(4, 4, 4).unwrap();
        let tri = [ProblemGraph::complete(3)];
        let cfg = EmbedConfig::default();
        let dense = parallel_embedding_search(&tri, &h, false, 1, &cfg).unwrap();
        let isolated = parallel_embedding_search(&tri, &h, true, 1, &cfg).unwrap();
        validate_plan(&dense, &tri, &h).unwrap();
        validate_plan(&isolated, &tri, &h).unwrap();
        assert!(dense.len() >= isolated.len());
        assert!(isolated.len() >= 1);
        assert_eq!(dense.counts()[&0], dense.len());
    }

    #[test]
    fn violations_name_the_offender() {
        let h = gen_chimera(1, 1, 4).unwrap();
        let edge = [ProblemGraph::complete(2)];
        let shared = plan(vec![entry(0, vec![vec![0], vec![4]]), entry(0, vec![vec![1], vec![4]])], false);
        assert_eq!(
            validate_plan(&shared, &edge, &h),
            Err(PlanViolation::SharedQubit {
                qubit: 4,
                first: (0, 1),
                second: (1, 1)
            })
        );
        let adjacent = plan(vec![entry(0, vec![vec![0], vec![4]]), entry(0, vec![vec![1], vec![5]])], true);
        assert_eq!(
            validate_plan(&adjacent, &edge, &h),
            Err(PlanViolation::AdjacentInstances {
                coupler: (0, 5),
                entries: (0, 1)
            })
        );
        let mut ok = adjacent.clone();
        ok.isolation = false;
        validate_plan(&ok, &edge, &h).unwrap();

        let broken = plan(vec![entry(0, vec![vec![0, 1], vec![4]])], false);
        assert_eq!(
            validate_plan(&broken, &edge, &h),
            Err(PlanViolation::DisconnectedChain { entry: 0, node: 0 })
        );
        let uncovered = plan(vec![entry(0, vec![vec![0], vec![1]])], false);
        assert_eq!(
            validate_plan(&uncovered, &edge, &h),
            Err(PlanViolation::MissingCoupler { entry: 0, edge: (0, 1) })
        );
        let disabled = h.remove_nodes(&[4].into()).unwrap();
        assert!(matches!(
            validate_plan(&ok, &edge, &disabled),
            Err(PlanViolation::UnavailableQubit { qubit: 4, .. })
        ));
        let unknown = plan(vec![entry(3, vec![vec![0], vec![4]])], false);
        assert!(matches!(validate_plan(&unknown, &edge, &h), Err(PlanViolation::UnknownProblem { .. })));
    }

    #[test]
    fn chain_stat_examples() {
        let singletons = plan(vec![entry(0, vec![vec![0], vec![4]])], false);
        let s = chain_stats(&singletons).unwrap();
        assert_eq!((s.aggregate.mean, s.aggregate.sd, s.aggregate.max), (1.0, 0.0, 1));

        let a = entry(0, vec![vec![0]]);
        let b = entry(0, vec![vec![4, 0, 5]]);
        let s = chain_stats(&plan(vec![a.clone(), b.clone()], false)).unwrap();
        assert_eq!((s.aggregate.mean, s.aggregate.sd, s.aggregate.max), (2.0, 1.0, 3));
        let r = chain_stats(&plan(vec![b, a], false)).unwrap();
        assert_eq!(r.aggregate, s.aggregate);
    }

    #[test]
    fn text_round_trip() {
        let h = gen_chimera(3, 3, 4).unwrap();
        let problems = [ProblemGraph::complete(4), ProblemGraph::new(3, [(0, 1)]).unwrap()];
        let p = parallel_embedding_search(&problems, &h, true, 2, &EmbedConfig::default()).unwrap();
        assert!(p.len() >= 2);
        let back = parse_plan(&plan_to_string(&p)).unwrap();
        assert_eq!(back, p);
        assert!(parse_plan("isolation maybe\nhardware x\n").is_err());
        assert!(matches!(
            parse_plan("isolation true\nhardware x\n0: [1]\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
