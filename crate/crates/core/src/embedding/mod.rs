//! Minor embedding of logical graphs into hardware graphs, and parallel
//! packing of many instances onto one device.

mod clique;
mod heuristic;
mod plan;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::ProblemGraph;
use crate::seed;
use crate::topology::{HardwareGraph, QubitId};
use heuristic::{source_component_sizes, Search, Target, TryOutcome};

pub use plan::{
    chain_stats, parallel_embedding_search, parse_plan, plan_to_string, validate_plan, ChainStats, ParallelPlan,
    PlanEntry, PlanViolation, Summary, validate_embedding,
};

/// Search settings for [`find_embedding`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    /// Independent restarts; try `t` uses a seed derived from `(seed, t)`.
    pub tries: usize,
    /// Rip-up-and-reroute passes per try.
    pub max_passes: usize,
    /// A try stops after this many passes without reducing qubit overlap.
    pub patience: usize,
    /// Wall-clock budget for one call, 0 for none. Hitting it returns
    /// not-found, which makes the result depend on machine speed.
    pub timeout_ms: u64,
    /// Qubit weight is `weight_base^usage`.
    pub weight_base: f64,
    /// On Chimera, also try the native clique layout and keep it when the
    /// search finds nothing or needs more qubits.
    pub clique_layout: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            tries: 10,
            max_passes: 32,
            patience: 16,
            timeout_ms: 1000,
            weight_base: 3.0,
            clique_layout: true,
        }
    }
}

/// Logical node `v` is represented by the connected qubit set `chain(v)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    chains: Vec<Vec<QubitId>>,
}

impl Embedding {
    /// Chains are stored sorted. Empty chains are allowed here and rejected
    /// by validation.
    pub fn new(chains: Vec<Vec<QubitId>>) -> Self {
        let chains = chains
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        Embedding { chains }
    }

    pub fn node_count(&self) -> usize {
        self.chains.len()
    }

    pub fn chain(&self, v: usize) -> &[QubitId] {
        &self.chains[v]
    }

    pub fn chains(&self) -> &[Vec<QubitId>] {
        &self.chains
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.chains.iter().flatten().copied()
    }

    pub fn qubit_count(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }
}

/// Search for an embedding of `source` into the effective graph of `h`.
/// `Ok(None)` means not found within the configured tries or time budget.
/// On Chimera the result is the smaller of the search result and the native
/// clique layout, unless [`EmbedConfig::clique_layout`] is off.
pub fn find_embedding(source: &ProblemGraph, h: &HardwareGraph, seed: u64, cfg: &EmbedConfig) -> Result<Option<Embedding>> {
    if h.effective_count() == 0 {
        return Err(Error::InvalidArgument("hardware graph has no enabled qubits".into()));
    }
    if cfg.tries == 0 || !(cfg.weight_base > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "embedding needs tries >= 1 and weight base > 1, got {} and {}",
            cfg.tries, cfg.weight_base
        )));
    }
    let target = Target::new(h);
    let src = source.adjacency();
    if !fits(&source_component_sizes(&src), &target.component_sizes()) {
        return Ok(None);
    }
    let deadline = (cfg.timeout_ms > 0).then(|| Instant::now() + Duration::from_millis(cfg.timeout_ms));
    let mut found = None;
    for t in 0..cfg.tries {
        let mut rng = seed::rng(seed::derive(seed, t as u64));
        match Search::new(&target, &src, cfg, deadline).run(&mut rng, t == 0) {
            TryOutcome::Found(chains) => {
                let chains = chains
                    .into_iter()
                    .map(|c| c.into_iter().map(|q| target.ids[q as usize]).collect())
                    .collect();
                found = Some(Embedding::new(chains));
                break;
            }
            TryOutcome::TimedOut => break,
            TryOutcome::Failed => {}
        }
    }
    if cfg.clique_layout {
        if let Some(chains) = clique::place_clique(source.node_count(), h) {
            let clique = Embedding::new(chains);
            if found.as_ref().is_none_or(|e| clique.qubit_count() < e.qubit_count()) {
                found = Some(clique);
            }
        }
    }
    Ok(found)
}

/// Necessary size conditions: the largest logical component needs a hardware
/// component at least as large, and the totals must fit.
fn fits(source: &[usize], target: &[usize]) -> bool {
    let largest = |v: &[usize]| v.iter().copied().max().unwrap_or(0);
    largest(source) <= largest(target) && source.iter().sum::<usize>() <= target.iter().sum::<usize>()
}
