//! Seeded simulated annealing over Ising models, exact ground-state
//! sampling, and majority-vote unembedding of composed programs.
//!
//! Spin `+1` is binary `1` throughout.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameterize::{ComposedProgram, LogicalProblem};
use crate::qubo::{exact_ground_states, spins_to_bits, IsingModel};
use crate::seed;

pub const DEFAULT_READS: usize = 2500;
pub const DEFAULT_SWEEPS: usize = 1000;

/// Stream tag separating tie-break coins from the annealing streams.
const TIE_STREAM: u64 = 0x7469_6573;

/// Inverse-temperature ladder for [`sa_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BetaSchedule {
    /// Derived from the model: the hottest step accepts the largest
    /// single-spin move with probability 1/2, the coldest accepts the
    /// smallest nonzero move with probability 1/100.
    Auto,
    Geometric { beta_min: f64, beta_max: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Auto
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub reads: usize,
    pub sweeps: usize,
    pub schedule: BetaSchedule,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            reads: DEFAULT_READS,
            sweeps: DEFAULT_SWEEPS,
            schedule: BetaSchedule::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Read {
    /// Spins in the order of [`SampleSet::variables`].
    pub spins: Vec<i8>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    /// Model variable (qubit id) of each spin position, ascending.
    pub variables: Vec<usize>,
    pub reads: Vec<Read>,
    pub wall_time_seconds: f64,
    pub sweeps: usize,
    pub seed: u64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl SampleSet {
    /// Position of each variable in the spin vectors.
    pub fn positions(&self) -> HashMap<usize, usize> {
        self.variables.iter().enumerate().map(|(k, &v)| (v, k)).collect()
    }

    pub fn best(&self) -> Option<&Read> {
        self.reads.iter().min_by(|a, b| a.energy.total_cmp(&b.energy))
    }

    /// One row per read: `read,energy,spins` with the spins as a bitstring.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["read", "energy", "spins"])?;
        for (r, read) in self.reads.iter().enumerate() {
            out.write_record([r.to_string(), read.energy.to_string(), bitstring(&spins_to_bits(&read.spins))])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn bitstring(x: &[u8]) -> String {
    x.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// Variables that appear in at least one linear or quadratic term.
pub fn active_variables(m: &IsingModel) -> Vec<usize> {
    let mut v: Vec<usize> = m.h().keys().copied().chain(m.j().keys().flat_map(|&(i, j)| [i, j])).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Re-evaluate a read on the full model. Variables outside the sample carry
/// no terms, so their value does not matter.
pub fn read_energy(m: &IsingModel, variables: &[usize], spins: &[i8]) -> Result<f64> {
    let mut full = vec![1i8; m.size()];
    for (&v, &s) in variables.iter().zip(spins) {
        full[v] = s;
    }
    m.energy(&full)
}

/// Compact form of a model restricted to its sampled variables.
struct Local {
    h: Vec<f64>,
    start: Vec<usize>,
    nbr: Vec<(u32, f64)>,
}

impl Local {
    fn new(m: &IsingModel, variables: &[usize]) -> Result<Self> {
        let index: HashMap<usize, usize> = variables.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let at = |v: usize| {
            index
                .get(&v)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("variable {v} has terms but is not sampled")))
        };
        let n = variables.len();
        let mut h = vec![0.0; n];
        for (&i, &v) in m.h() {
            h[at(i)?] += v;
        }
        let mut lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in m.j() {
            let (a, b) = (at(i)?, at(j)?);
            lists[a].push((b as u32, w));
            lists[b].push((a as u32, w));
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        let mut nbr = Vec::new();
        for l in lists {
            nbr.extend(l);
            start.push(nbr.len());
        }
        Ok(Local { h, start, nbr })
    }

    fn field(&self, i: usize, s: &[i8]) -> f64 {
        let mut f = self.h[i];
        for &(j, w) in &self.nbr[self.start[i]..self.start[i + 1]] {
            f += w * f64::from(s[j as usize]);
        }
        f
    }

    /// Largest single-spin energy change and smallest nonzero coefficient
    /// move, both as energy differences.
    fn move_range(&self) -> (f64, f64) {
        let mut largest: f64 = 0.0;
        let mut smallest = f64::INFINITY;
        for i in 0..self.h.len() {
            let mut total = self.h[i].abs();
            if total > 0.0 {
                smallest = smallest.min(2.0 * total);
            }
            for &(_, w) in &self.nbr[self.start[i]..self.start[i + 1]] {
                total += w.abs();
                if w != 0.0 {
                    smallest = smallest.min(2.0 * w.abs());
                }
            }
            largest = largest.max(2.0 * total);
        }
        (largest, smallest)
    }
}

/// Beta range from the acceptance rule of [`BetaSchedule::Auto`]. A model
/// with no terms gets `(0.1, 1.0)`; any range works there.
fn auto_range(local: &Local) -> (f64, f64) {
    let (largest, smallest) = local.move_range();
    if largest == 0.0 {
        return (0.1, 1.0);
    }
    let beta_min = std::f64::consts::LN_2 / largest;
    let beta_max = 100f64.ln() / smallest;
    (beta_min, beta_max)
}

/// `sweeps` betas spaced geometrically from `beta_min` to `beta_max`.
pub fn geometric_ladder(beta_min: f64, beta_max: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![beta_max];
    }
    let ratio = (beta_max / beta_min).powf(1.0 / (sweeps - 1) as f64);
    (0..sweeps).map(|k| beta_min * ratio.powi(k as i32)).collect()
}

fn anneal(local: &Local, betas: &[f64], seed: u64) -> Vec<i8> {
    let mut rng = seed::rng(seed);
    let n = local.h.len();
    let mut s: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    for &beta in betas {
        for i in 0..n {
            let delta = -2.0 * f64::from(s[i]) * local.field(i, &s);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                s[i] = -s[i];
            }
        }
    }
    s
}

/// Simulated annealing over the active variables of `m`.
pub fn sa_sample(m: &IsingModel, params: &SaParams, seed: u64) -> Result<SampleSet> {
    sa_sample_over(m, &active_variables(m), params, seed)
}

/// Simulated annealing over an explicit variable set, which must cover
/// every variable carrying a term. Read `r` uses the seed derived from
/// `(seed, r)`, so results do not depend on the thread count.
pub fn sa_sample_over(m: &IsingModel, variables: &[usize], params: &SaParams, seed: u64) -> Result<SampleSet> {
    if params.reads == 0 || params.sweeps == 0 {
        return Err(Error::InvalidArgument(format!(
            "reads and sweeps must be at least 1, got {} and {}",
            params.reads, params.sweeps
        )));
    }
    let mut variables = variables.to_vec();
    variables.sort_unstable();
    variables.dedup();
    if let Some(&v) = variables.iter().find(|&&v| v >= m.size()) {
        return Err(Error::InvalidArgument(format!("variable {v} outside a model of size {}", m.size())));
    }
    let local = Local::new(m, &variables)?;
    let (beta_min, beta_max) = match params.schedule {
        BetaSchedule::Auto => auto_range(&local),
        BetaSchedule::Geometric { beta_min, beta_max } => {
            if !(beta_min > 0.0 && beta_min < beta_max && beta_max.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "beta range needs 0 < beta_min < beta_max, got {beta_min} and {beta_max}"
                )));
            }
            (beta_min, beta_max)
        }
    };
    let betas = geometric_ladder(beta_min, beta_max, params.sweeps);
    let start = Instant::now();
    let reads = (0..params.reads)
        .into_par_iter()
        .map(|r| {
            let spins = anneal(&local, &betas, seed::derive(seed, r as u64));
            let energy = read_energy(m, &variables, &spins)?;
            Ok(Read { spins, energy })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        variables,
        reads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        sweeps: params.sweeps,
        seed,
        beta_min,
        beta_max,
    })
}

/// Every ground state of `m` (size at most 24) and the ground energy.
pub fn exact_sample(m: &IsingModel) -> Result<(Vec<Vec<i8>>, f64)> {
    let g = exact_ground_states(m)?;
    Ok((g.states, g.energy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalRead {
    pub bits: Vec<u8>,
    /// Energy on the original logical QUBO.
    pub energy: f64,
    /// Fraction of this instance's chains that were not unanimous.
    pub chain_break_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSolutions {
    /// Position of the instance in the program.
    pub entry: usize,
    pub problem_id: usize,
    pub reads: Vec<LogicalRead>,
    /// Fraction of (read, chain) pairs with a broken chain.
    pub chain_break_fraction: f64,
    /// Time spent voting and evaluating energies for this instance.
    pub unembed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalSolutionSet {
    pub instances: Vec<InstanceSolutions>,
}

impl LogicalSolutionSet {
    /// One row per (read, instance): `read,entry,problem_id,bits,energy,chain_break_fraction`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["read", "entry", "problem_id", "bits", "energy", "chain_break_fraction"])?;
        let reads = self.instances.first().map_or(0, |i| i.reads.len());
        for r in 0..reads {
            for inst in &self.instances {
                let lr = &inst.reads[r];
                out.write_record([
                    r.to_string(),
                    inst.entry.to_string(),
                    inst.problem_id.to_string(),
                    bitstring(&lr.bits),
                    lr.energy.to_string(),
                    lr.chain_break_fraction.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Decode every instance of `program` from `samples` by majority vote over
/// each chain. A tied chain takes a coin flip seeded by the read, the
/// instance and the chain.
pub fn unembed_majority_vote(
    samples: &SampleSet,
    program: &ComposedProgram,
    problems: &[LogicalProblem],
) -> Result<LogicalSolutionSet> {
    let pos = samples.positions();
    let tie_seed = seed::derive(samples.seed, TIE_STREAM);
    let mut instances = Vec::with_capacity(program.instances.len());
    for inst in &program.instances {
        let start = Instant::now();
        let problem = problems.get(inst.problem_id).ok_or_else(|| {
            Error::InvalidArgument(format!("program refers to problem {}, only {} given", inst.problem_id, problems.len()))
        })?;
        let chains = inst.embedding.chains();
        if chains.len() != problem.qubo.size() {
            return Err(Error::Shape {
                expected: problem.qubo.size(),
                got: chains.len(),
            });
        }
        let mut index = Vec::with_capacity(chains.len());
        for chain in chains {
            let mut at = Vec::with_capacity(chain.len());
            for &q in chain {
                match pos.get(&q) {
                    Some(&k) => at.push(k),
                    None => {
                        return Err(Error::Shape {
                            expected: inst.embedding.qubit_count(),
                            got: inst.embedding.qubits().filter(|q| pos.contains_key(q)).count(),
                        })
                    }
                }
            }
            index.push(at);
        }
        let mut broken_total = 0usize;
        let mut reads = Vec::with_capacity(samples.reads.len());
        for (r, read) in samples.reads.iter().enumerate() {
            let mut bits = Vec::with_capacity(index.len());
            let mut broken = 0usize;
            for (v, at) in index.iter().enumerate() {
                let up = at.iter().filter(|&&k| read.spins[k] > 0).count();
                let down = at.len() - up;
                if up > 0 && down > 0 {
                    broken += 1;
                }
                let bit = match up.cmp(&down) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => {
                        let s = seed::derive(seed::derive(seed::derive(tie_seed, r as u64), inst.entry as u64), v as u64);
                        u8::from(seed::rng(s).random::<bool>())
                    }
                };
                bits.push(bit);
            }
            broken_total += broken;
            let energy = problem.qubo.energy(&bits)?;
            reads.push(LogicalRead {
                bits,
                energy,
                chain_break_fraction: if index.is_empty() { 0.0 } else { broken as f64 / index.len() as f64 },
            });
        }
        let pairs = samples.reads.len() * index.len();
        instances.push(InstanceSolutions {
            entry: inst.entry,
            problem_id: inst.problem_id,
            reads,
            chain_break_fraction: if pairs == 0 { 0.0 } else { broken_total as f64 / pairs as f64 },
            unembed_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(LogicalSolutionSet { instances })
}
