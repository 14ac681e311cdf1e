//! Binary (QUBO) and spin (Ising) objectives.
//!
//! Both forms store sparse linear and pairwise terms over variables
//! `0..size` plus a constant offset. Pair keys are normalized to `(i, j)` with
//! `i < j`. Spin `+1` corresponds to binary `1` everywhere in this crate.

mod exhaustive;
mod problems;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::ProblemGraph;

pub use exhaustive::{brute_force_min, exact_ground_states, ExhaustiveModel, GroundSet, EXHAUSTIVE_LIMIT};
pub use problems::{
    build_gpp_qubo, build_mvcp_qubo, cut_edges, gpp_balanced_penalty, gpp_penalty_bound,
    partition_balanced, vertex_cover_valid, GppPenalty, DEFAULT_MVCP_A, DEFAULT_MVCP_B,
};

fn pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Terms {
    size: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl Terms {
    fn new(size: usize) -> Self {
        Terms {
            size,
            ..Default::default()
        }
    }

    fn add_linear(&mut self, i: usize, value: f64) {
        assert!(i < self.size, "variable {i} out of range for size {}", self.size);
        *self.linear.entry(i).or_insert(0.0) += value;
    }

    fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "quadratic term on a single variable {i}");
        assert!(i < self.size && j < self.size, "pair ({i}, {j}) out of range for size {}", self.size);
        *self.quadratic.entry(pair(i, j)).or_insert(0.0) += value;
    }

    fn scaled(&self, factor: f64) -> Terms {
        Terms {
            size: self.size,
            linear: self.linear.iter().map(|(&k, &v)| (k, v * factor)).collect(),
            quadratic: self.quadratic.iter().map(|(&k, &v)| (k, v * factor)).collect(),
            offset: self.offset * factor,
        }
    }

    fn evaluate<T: Copy + Into<f64>>(&self, values: &[T]) -> Result<f64> {
        if values.len() != self.size {
            return Err(Error::Shape {
                expected: self.size,
                got: values.len(),
            });
        }
        let mut e = self.offset;
        for (&i, &a) in &self.linear {
            e += a * values[i].into();
        }
        for (&(i, j), &w) in &self.quadratic {
            e += w * values[i].into() * values[j].into();
        }
        Ok(e)
    }

    fn max_abs_linear(&self) -> f64 {
        self.linear.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn max_abs_quadratic(&self) -> f64 {
        self.quadratic.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Minimize `offset + Σ Q_ii x_i + Σ_{i<j} Q_ij x_i x_j` over `x ∈ {0,1}^size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct Qubo {
    terms: Terms,
}

/// `offset + Σ h_i s_i + Σ_{i<j} J_ij s_i s_j` over `s ∈ {-1,+1}^size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct IsingModel {
    terms: Terms,
}

macro_rules! shared_accessors {
    ($ty:ty) => {
        impl $ty {
            pub fn new(size: usize) -> Self {
                Self { terms: Terms::new(size) }
            }

            pub fn size(&self) -> usize {
                self.terms.size
            }

            pub fn offset(&self) -> f64 {
                self.terms.offset
            }

            pub fn set_offset(&mut self, offset: f64) {
                self.terms.offset = offset;
            }

            pub fn add_offset(&mut self, value: f64) {
                self.terms.offset += value;
            }

            /// Linear coefficients keyed by variable.
            pub fn linear(&self) -> &BTreeMap<usize, f64> {
                &self.terms.linear
            }

            /// Pair coefficients keyed by `(i, j)`, `i < j`.
            pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
                &self.terms.quadratic
            }

            pub fn add_linear(&mut self, i: usize, value: f64) {
                self.terms.add_linear(i, value);
            }

            pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
                self.terms.add_quadratic(i, j, value);
            }

            pub fn linear_at(&self, i: usize) -> f64 {
                self.terms.linear.get(&i).copied().unwrap_or(0.0)
            }

            pub fn quadratic_at(&self, i: usize, j: usize) -> f64 {
                self.terms.quadratic.get(&pair(i, j)).copied().unwrap_or(0.0)
            }

            /// Multiply every coefficient and the offset by `factor`.
            pub fn scaled(&self, factor: f64) -> Self {
                Self {
                    terms: self.terms.scaled(factor),
                }
            }

            pub fn max_abs_linear(&self) -> f64 {
                self.terms.max_abs_linear()
            }

            pub fn max_abs_quadratic(&self) -> f64 {
                self.terms.max_abs_quadratic()
            }

            /// Graph over the variables with an edge for every nonzero pair term.
            pub fn interaction_graph(&self) -> Result<ProblemGraph> {
                ProblemGraph::new(
                    self.size(),
                    self.terms.quadratic.iter().filter(|(_, &w)| w != 0.0).map(|(&e, _)| e),
                )
            }

            pub fn to_json(&self) -> String {
                serde_json::to_string_pretty(self).expect("model serializes")
            }

            pub fn from_json(text: &str) -> Result<Self> {
                Ok(serde_json::from_str(text)?)
            }
        }
    };
}

shared_accessors!(Qubo);
shared_accessors!(IsingModel);

impl Qubo {
    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if let Some(bad) = x.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("binary assignment contains {bad}")));
        }
        self.terms.evaluate(x)
    }
}

impl IsingModel {
    pub fn h(&self) -> &BTreeMap<usize, f64> {
        self.linear()
    }

    pub fn j(&self) -> &BTreeMap<(usize, usize), f64> {
        self.quadratic()
    }

    pub fn energy(&self, s: &[i8]) -> Result<f64> {
        if let Some(bad) = s.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidArgument(format!("spin assignment contains {bad}")));
        }
        self.terms.evaluate(s)
    }

    /// Inverse of [`qubo_to_ising`] under `x = (1 + s) / 2`.
    pub fn to_qubo(&self) -> Qubo {
        let mut q = Qubo::new(self.size());
        let mut offset = self.offset();
        for (&i, &h) in self.h() {
            q.add_linear(i, 2.0 * h);
            offset -= h;
        }
        for (&(i, j), &w) in self.j() {
            q.add_quadratic(i, j, 4.0 * w);
            q.add_linear(i, -2.0 * w);
            q.add_linear(j, -2.0 * w);
            offset += w;
        }
        q.set_offset(offset);
        q
    }
}

/// Substitute `x_i = (1 + s_i) / 2`; energies agree for every assignment.
pub fn qubo_to_ising(q: &Qubo) -> IsingModel {
    let mut m = IsingModel::new(q.size());
    let mut offset = q.offset();
    for (&i, &a) in q.linear() {
        m.add_linear(i, a / 2.0);
        offset += a / 2.0;
    }
    for (&(i, j), &w) in q.quadratic() {
        let quarter = w / 4.0;
        m.add_quadratic(i, j, quarter);
        m.add_linear(i, quarter);
        m.add_linear(j, quarter);
        offset += quarter;
    }
    m.set_offset(offset);
    m
}

pub fn spins_to_bits(s: &[i8]) -> Vec<u8> {
    s.iter().map(|&v| u8::from(v > 0)).collect()
}

pub fn bits_to_spins(x: &[u8]) -> Vec<i8> {
    x.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    size: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<String, f64>,
    offset: f64,
}

impl From<Terms> for ModelRepr {
    fn from(t: Terms) -> Self {
        ModelRepr {
            size: t.size,
            linear: t.linear,
            quadratic: t
                .quadratic
                .into_iter()
                .map(|((i, j), v)| (format!("{i},{j}"), v))
                .collect(),
            offset: t.offset,
        }
    }
}

impl TryFrom<ModelRepr> for Terms {
    type Error = String;

    fn try_from(r: ModelRepr) -> std::result::Result<Self, String> {
        let mut t = Terms::new(r.size);
        for (i, v) in r.linear {
            if i >= r.size {
                return Err(format!("linear key {i} out of range for size {}", r.size));
            }
            t.linear.insert(i, v);
        }
        for (key, v) in r.quadratic {
            let (a, b) = key
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| format!("quadratic key `{key}` is not `i,j`"))?;
            if a == b || a >= r.size || b >= r.size {
                return Err(format!("quadratic key `{key}` invalid for size {}", r.size));
            }
            if t.quadratic.insert(pair(a, b), v).is_some() {
                return Err(format!("quadratic pair `{key}` listed twice"));
            }
        }
        t.offset = r.offset;
        Ok(t)
    }
}

macro_rules! repr_conversions {
    ($ty:ty) => {
        impl From<$ty> for ModelRepr {
            fn from(m: $ty) -> Self {
                m.terms.into()
            }
        }

        impl TryFrom<ModelRepr> for $ty {
            type Error = String;

            fn try_from(r: ModelRepr) -> std::result::Result<Self, String> {
                Ok(Self { terms: r.try_into()? })
            }
        }
    };
}

repr_conversions!(Qubo);
repr_conversions!(IsingModel);
