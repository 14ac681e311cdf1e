//! Exhaustive minimization by Gray-code enumeration.
//!
//! The assignment space is split into a fixed number of chunks that depends
//! only on the problem size, so the result is the same whatever the thread
//! count. Near-ties are resolved on exact re-evaluation.

use rayon::prelude::*;

use super::{IsingModel, Qubo, Terms};
use crate::error::{Error, Result};

/// Largest model size accepted by the exhaustive routines.
pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Dense view of a quadratic form over variables taking values `lo` or `hi`.
struct Dense {
    n: usize,
    lo: f64,
    hi: f64,
    linear: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    offset: f64,
    tolerance: f64,
}

impl Dense {
    fn from_terms(t: &Terms, lo: f64, hi: f64) -> Self {
        let n = t.size;
        let mut linear = vec![0.0; n];
        let mut neighbors = vec![Vec::new(); n];
        let mut scale = t.offset.abs();
        for (&i, &a) in &t.linear {
            linear[i] += a;
            scale += a.abs();
        }
        for (&(i, j), &w) in &t.quadratic {
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
            scale += w.abs();
        }
        Dense {
            n,
            lo,
            hi,
            linear,
            neighbors,
            offset: t.offset,
            tolerance: 1e-9 * scale.max(1.0),
        }
    }

    fn value(&self, index: u64, i: usize) -> f64 {
        if (index >> i) & 1 == 1 {
            self.hi
        } else {
            self.lo
        }
    }

    fn energy_of(&self, index: u64) -> f64 {
        let mut e = self.offset;
        for i in 0..self.n {
            let vi = self.value(index, i);
            e += self.linear[i] * vi;
            for &(j, w) in &self.neighbors[i] {
                if j > i {
                    e += w * vi * self.value(index, j);
                }
            }
        }
        e
    }

    /// Scan every assignment whose top `n - low_bits` bits equal `high`,
    /// returning indices within tolerance of the chunk minimum.
    fn scan_chunk(&self, high: u64, low_bits: usize) -> (f64, Vec<u64>) {
        let base = high << low_bits;
        let mut state = base;
        let mut energy = self.energy_of(state);
        let mut field: Vec<f64> = (0..self.n)
            .map(|i| {
                self.linear[i]
                    + self.neighbors[i]
                        .iter()
                        .map(|&(j, w)| w * self.value(state, j))
                        .sum::<f64>()
            })
            .collect();
        let mut best = energy;
        let mut hits = vec![state];
        let step = self.hi - self.lo;
        for k in 1u64..(1u64 << low_bits) {
            let i = k.trailing_zeros() as usize;
            let delta = if (state >> i) & 1 == 1 { -step } else { step };
            energy += delta * field[i];
            state ^= 1 << i;
            for &(j, w) in &self.neighbors[i] {
                field[j] += w * delta;
            }
            if energy < best - self.tolerance {
                best = energy;
                hits.clear();
                hits.push(state);
            } else if energy <= best + self.tolerance {
                hits.push(state);
                if energy < best {
                    best = energy;
                }
            }
        }
        (best, hits)
    }

    /// All assignment indices attaining the minimum, with the exact minimum.
    fn minimizers(&self) -> (f64, Vec<u64>) {
        let high_bits = self.n.saturating_sub(12).min(8);
        let low_bits = self.n - high_bits;
        let chunks: Vec<(f64, Vec<u64>)> = (0..1u64 << high_bits)
            .into_par_iter()
            .map(|h| self.scan_chunk(h, low_bits))
            .collect();
        let approx_best = chunks.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let mut candidates: Vec<(u64, f64)> = chunks
            .into_iter()
            .filter(|c| c.0 <= approx_best + self.tolerance)
            .flat_map(|c| c.1)
            .map(|s| (s, self.energy_of(s)))
            .collect();
        let exact_best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        candidates.retain(|c| c.1 <= exact_best + self.tolerance);
        candidates.sort_by_key(|c| lexicographic_key(c.0, self.n));
        (exact_best, candidates.into_iter().map(|c| c.0).collect())
    }
}

/// Sort key that orders indices like the vectors `(x_0, x_1, ...)`.
fn lexicographic_key(index: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        index.reverse_bits() >> (64 - n)
    }
}

fn check_capacity(what: &'static str, size: usize) -> Result<()> {
    if size > EXHAUSTIVE_LIMIT {
        Err(Error::Capacity {
            what,
            size,
            limit: EXHAUSTIVE_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn bits(index: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Exhaustive minimum of a QUBO. Ties go to the lexicographically smallest
/// assignment.
pub fn brute_force_min(q: &Qubo) -> Result<(Vec<u8>, f64)> {
    check_capacity("QUBO", q.size())?;
    let dense = Dense::from_terms(&q.terms, 0.0, 1.0);
    let (_, states) = dense.minimizers();
    let x = bits(states[0], q.size());
    let e = q.energy(&x)?;
    Ok((x, e))
}

/// Every minimizing assignment of a model, lexicographically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSet<T> {
    pub states: Vec<Vec<T>>,
    pub energy: f64,
}

pub trait ExhaustiveModel {
    type Value;
    fn ground_states(&self) -> Result<GroundSet<Self::Value>>;
}

impl ExhaustiveModel for Qubo {
    type Value = u8;

    fn ground_states(&self) -> Result<GroundSet<u8>> {
        check_capacity("QUBO", self.size())?;
        let dense = Dense::from_terms(&self.terms, 0.0, 1.0);
        let (energy, states) = dense.minimizers();
        Ok(GroundSet {
            states: states.into_iter().map(|s| bits(s, self.size())).collect(),
            energy,
        })
    }
}

impl ExhaustiveModel for IsingModel {
    type Value = i8;

    fn ground_states(&self) -> Result<GroundSet<i8>> {
        check_capacity("Ising model", self.size())?;
        let dense = Dense::from_terms(&self.terms, -1.0, 1.0);
        let (energy, states) = dense.minimizers();
        let n = self.size();
        Ok(GroundSet {
            states: states
                .into_iter()
                .map(|s| (0..n).map(|i| if (s >> i) & 1 == 1 { 1 } else { -1 }).collect())
                .collect(),
            energy,
        })
    }
}

/// Exhaustive ground set of a QUBO or Ising model (size at most 24).
pub fn exact_ground_states<M: ExhaustiveModel>(m: &M) -> Result<GroundSet<M::Value>> {
    m.ground_states()
}
