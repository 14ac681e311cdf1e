//! Transverse-field Ising spectra of small models along an annealing
//! schedule, composite spectra of independent instances, and diabatic and
//! thermal transition probabilities.
//!
//! Energies are in GHz (E/h) everywhere except inside
//! [`transition_probabilities`].

use std::io::{Read as _, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::IsingModel;

/// Largest model [`build_hamiltonian`] accepts.
pub const DENSE_LIMIT: usize = 12;
pub const DEFAULT_ANNEAL_TIME: f64 = 20e-6;
pub const DEFAULT_TEMPERATURE: f64 = 0.016;
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Width of the bracket left around the minimum gap after refinement.
pub const MIN_GAP_TOLERANCE: f64 = 1e-4;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Anchors of the default schedule as `(s, A_GHz, B_GHz)`.
pub const DEFAULT_ANCHORS: [(f64, f64, f64); 3] = [(0.0, 9.62, 0.23), (0.28, 1.28, 1.28), (1.0, 0.0, 7.56)];

/// Piecewise-linear schedule through `(s, A, B)` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    samples: Vec<(f64, f64, f64)>,
    anneal_time_seconds: f64,
}

impl AnnealSchedule {
    pub fn new(samples: Vec<(f64, f64, f64)>, anneal_time_seconds: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::Validation(format!("schedule: {msg}")));
        if samples.len() < 2 {
            return bad(format!("needs at least two samples, got {}", samples.len()));
        }
        if samples[0].0 != 0.0 || samples[samples.len() - 1].0 != 1.0 {
            return bad("s must run from 0 to 1".into());
        }
        for (k, &(s, a, b)) in samples.iter().enumerate() {
            if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
                return bad(format!("sample {k} has A={a}, B={b}; both must be finite and non-negative"));
            }
            if k > 0 {
                let (ps, pa, pb) = samples[k - 1];
                if s <= ps {
                    return bad(format!("s not strictly increasing at sample {k}"));
                }
                if a > pa || b < pb {
                    return bad(format!("A must not increase and B must not decrease (sample {k})"));
                }
            }
        }
        if !(anneal_time_seconds > 0.0 && anneal_time_seconds.is_finite()) {
            return bad(format!("anneal time must be positive, got {anneal_time_seconds}"));
        }
        Ok(AnnealSchedule {
            samples,
            anneal_time_seconds,
        })
    }

    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.samples
    }

    pub fn anneal_time_seconds(&self) -> f64 {
        self.anneal_time_seconds
    }

    pub fn with_anneal_time(mut self, seconds: f64) -> Result<Self> {
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(Error::InvalidArgument(format!("anneal time must be positive, got {seconds}")));
        }
        self.anneal_time_seconds = seconds;
        Ok(self)
    }

    /// `(A(s), B(s))` by linear interpolation; exact at samples.
    pub fn at(&self, s: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("s = {s} outside [0, 1]")));
        }
        Ok(interpolate(&self.samples, s))
    }

    pub fn s_grid(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.0).collect()
    }

    /// Header `s,A_GHz,B_GHz`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "A_GHz", "B_GHz"])?;
        for &(s, a, b) in &self.samples {
            out.write_record([s.to_string(), a.to_string(), b.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R, anneal_time_seconds: f64) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let headers = input.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["s", "A_GHz", "B_GHz"] {
            return Err(Error::parse(1, "schedule header must be `s,A_GHz,B_GHz`"));
        }
        let mut samples = Vec::new();
        for (k, row) in input.records().enumerate() {
            let row = row?;
            let field = |i: usize| -> Result<f64> {
                row.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::parse(k + 2, format!("column {} is not a number", i + 1)))
            };
            samples.push((field(0)?, field(1)?, field(2)?));
        }
        AnnealSchedule::new(samples, anneal_time_seconds)
    }

    pub fn load(path: &Path, anneal_time_seconds: f64) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        AnnealSchedule::read_csv(text.as_bytes(), anneal_time_seconds).map_err(|e| e.with_path(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn interpolate(points: &[(f64, f64, f64)], s: f64) -> (f64, f64) {
    let k = points.partition_point(|p| p.0 < s);
    if k < points.len() && points[k].0 == s {
        return (points[k].1, points[k].2);
    }
    let (s0, a0, b0) = points[k - 1];
    let (s1, a1, b1) = points[k];
    let t = (s - s0) / (s1 - s0);
    (a0 + t * (a1 - a0), b0 + t * (b1 - b0))
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs two points");
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// The three published anchors, sampled on a 201-point grid.
pub fn default_schedule() -> AnnealSchedule {
    let samples = uniform_grid(DEFAULT_GRID_POINTS)
        .into_iter()
        .map(|s| {
            let (a, b) = interpolate(&DEFAULT_ANCHORS, s);
            (s, a, b)
        })
        .collect();
    AnnealSchedule::new(samples, DEFAULT_ANNEAL_TIME).expect("anchors are monotone")
}

fn check_size(m: &IsingModel) -> Result<()> {
    if m.size() > DENSE_LIMIT {
        return Err(Error::Capacity {
            what: "dense Hamiltonian",
            size: m.size(),
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Classical energies of every basis state. Bit `i` of the index set means
/// qubit `i` is in the `σz = -1` state.
fn diagonal(m: &IsingModel) -> Vec<f64> {
    let n = m.size();
    (0..1usize << n)
        .map(|k| {
            let spin = |i: usize| if (k >> i) & 1 == 0 { 1.0 } else { -1.0 };
            let mut e = m.offset();
            for (&i, &h) in m.h() {
                e += h * spin(i);
            }
            for (&(i, j), &w) in m.j() {
                e += w * spin(i) * spin(j);
            }
            e
        })
        .collect()
}

fn hamiltonian(n: usize, diag: &[f64], a: f64, b: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = 0.5 * b * diag[k];
        for i in 0..n {
            h[(k, k ^ (1 << i))] = -0.5 * a;
        }
    }
    h
}

/// `H(s) = -A(s)/2 Σ σx_i + B(s)/2 (Σ h_i σz_i + Σ J_ij σz_i σz_j + offset)`.
pub fn build_hamiltonian(m: &IsingModel, sched: &AnnealSchedule, s: f64) -> Result<DMatrix<f64>> {
    check_size(m)?;
    let (a, b) = sched.at(s)?;
    Ok(hamiltonian(m.size(), &diagonal(m), a, b))
}

fn lowest_two(n: usize, diag: &[f64], a: f64, b: f64) -> (f64, f64) {
    let mut ev: Vec<f64> = SymmetricEigen::new(hamiltonian(n, diag, a, b)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    (ev[0], ev[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub s_grid: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub gap: Vec<f64>,
    /// `(s*, Δ*)` of the smallest gap.
    pub min_gap: (f64, f64),
    /// Empty until [`transition_probabilities`] fills them.
    pub p_lz: Vec<f64>,
    pub p_thermal: Vec<f64>,
    pub p_total: Vec<f64>,
    /// `(s, P_total)` at the largest total probability.
    pub max_p_total: Option<(f64, f64)>,
}

impl SpectrumResult {
    fn from_curves(s_grid: Vec<f64>, e0: Vec<f64>, e1: Vec<f64>, min_gap: (f64, f64)) -> Self {
        let gap = e0.iter().zip(&e1).map(|(a, b)| b - a).collect();
        SpectrumResult {
            s_grid,
            e0,
            e1,
            gap,
            min_gap,
            p_lz: Vec::new(),
            p_thermal: Vec::new(),
            p_total: Vec::new(),
            max_p_total: None,
        }
    }

    /// Header `s,e0,e1,gap,p_lz,p_thermal,p_total`; probability cells are
    /// empty when not computed.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "e0", "e1", "gap", "p_lz", "p_thermal", "p_total"])?;
        let cell = |v: &[f64], i: usize| v.get(i).map_or(String::new(), f64::to_string);
        for i in 0..self.s_grid.len() {
            out.write_record([
                self.s_grid[i].to_string(),
                self.e0[i].to_string(),
                self.e1[i].to_string(),
                self.gap[i].to_string(),
                cell(&self.p_lz, i),
                cell(&self.p_thermal, i),
                cell(&self.p_total, i),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ground and first excited energies of `m` at each grid point. The minimum
/// gap is refined by ternary search in the grid cells next to the smallest
/// sampled gap.
pub fn eigencurves(m: &IsingModel, sched: &AnnealSchedule, s_grid: &[f64]) -> Result<SpectrumResult> {
    check_size(m)?;
    if m.size() == 0 {
        return Err(Error::InvalidArgument("a spectrum needs at least one qubit".into()));
    }
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("s grid must be nonempty and strictly increasing".into()));
    }
    let n = m.size();
    let diag = diagonal(m);
    let levels = s_grid
        .par_iter()
        .map(|&s| {
            let (a, b) = sched.at(s)?;
            Ok(lowest_two(n, &diag, a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let (e0, e1): (Vec<f64>, Vec<f64>) = levels.into_iter().unzip();
    let gap: Vec<f64> = e0.iter().zip(&e1).map(|(a, b)| b - a).collect();
    let gap_at = |s: f64| {
        let (a, b) = interpolate(sched.samples(), s);
        let (x, y) = lowest_two(n, &diag, a, b);
        y - x
    };
    let k = (0..gap.len()).min_by(|&a, &b| gap[a].total_cmp(&gap[b])).expect("nonempty grid");
    let mut best = (s_grid[k], gap[k]);
    let mut lo = s_grid[k.saturating_sub(1)];
    let mut hi = s_grid[(k + 1).min(s_grid.len() - 1)];
    while hi - lo > MIN_GAP_TOLERANCE {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let (g1, g2) = (gap_at(m1), gap_at(m2));
        for (s, g) in [(m1, g1), (m2, g2)] {
            if g < best.1 {
                best = (s, g);
            }
        }
        if g1 <= g2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(SpectrumResult::from_curves(s_grid.to_vec(), e0, e1, best))
}

/// Two independent copies of the same instance.
pub fn combine_identical(spec: &SpectrumResult) -> SpectrumResult {
    let e0: Vec<f64> = spec.e0.iter().map(|e| 2.0 * e).collect();
    let e1 = e0.iter().zip(&spec.gap).map(|(e, g)| e + g).collect();
    let mut out = SpectrumResult::from_curves(spec.s_grid.clone(), e0, e1, spec.min_gap);
    out.gap = spec.gap.clone();
    out
}

/// Two independent instances: energies add and the composite's first
/// excitation is the cheaper of the two.
pub fn combine_different(a: &SpectrumResult, b: &SpectrumResult) -> Result<SpectrumResult> {
    if a.s_grid != b.s_grid {
        return Err(Error::InvalidArgument("spectra are on different s grids".into()));
    }
    let e0: Vec<f64> = a.e0.iter().zip(&b.e0).map(|(x, y)| x + y).collect();
    let gap: Vec<f64> = a.gap.iter().zip(&b.gap).map(|(x, y)| x.min(*y)).collect();
    let e1 = e0.iter().zip(&gap).map(|(e, g)| e + g).collect();
    let min_gap = if a.min_gap.1 <= b.min_gap.1 { a.min_gap } else { b.min_gap };
    let mut out = SpectrumResult::from_curves(a.s_grid.clone(), e0, e1, min_gap);
    out.gap = gap;
    Ok(out)
}

/// `exp(-2π δ)`; an infinite δ gives 0.
pub fn p_landau_zener(delta: f64) -> f64 {
    (-2.0 * std::f64::consts::PI * delta).exp()
}

/// `1 / (1 + exp(Δ/kT))` for a gap given in GHz.
pub fn p_thermal(gap_ghz: f64, temperature_kelvin: f64) -> f64 {
    1.0 / (1.0 + (ghz_to_joules(gap_ghz) / (BOLTZMANN * temperature_kelvin)).exp())
}

pub fn p_total(p_lz: f64, p_thermal: f64) -> f64 {
    p_lz + (1.0 - p_lz) * p_thermal
}

pub fn ghz_to_joules(e: f64) -> f64 {
    PLANCK * e * 1e9
}

/// `δ = Δ² / (4ħv)`; zero velocity gives `+∞`.
pub fn adiabaticity(gap_joules: f64, velocity: f64) -> f64 {
    if velocity == 0.0 {
        f64::INFINITY
    } else {
        gap_joules * gap_joules / (4.0 * HBAR * velocity)
    }
}

/// Gap slope `|dΔ/ds|` by central differences, one-sided at the ends.
fn gap_slope(s: &[f64], gap: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let (l, r) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            ((gap[r] - gap[l]) / (s[r] - s[l])).abs()
        })
        .collect()
}

/// Fill the Landau-Zener, thermal and total probability curves. The sweep
/// velocity at each point is the local slope of the gap in joules divided by
/// the anneal time.
pub fn transition_probabilities(spec: &SpectrumResult, sched: &AnnealSchedule, temperature_kelvin: f64) -> Result<SpectrumResult> {
    if !(temperature_kelvin > 0.0 && temperature_kelvin.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature_kelvin}")));
    }
    if spec.gap.len() != spec.s_grid.len() || spec.gap.is_empty() {
        return Err(Error::InvalidArgument("spectrum has no gap curve".into()));
    }
    let t_a = sched.anneal_time_seconds();
    let slope = gap_slope(&spec.s_grid, &spec.gap);
    let mut out = spec.clone();
    out.p_lz.clear();
    out.p_thermal.clear();
    out.p_total.clear();
    for (i, &g) in spec.gap.iter().enumerate() {
        let v = ghz_to_joules(slope[i]) / t_a;
        let lz = p_landau_zener(adiabaticity(ghz_to_joules(g), v));
        let th = p_thermal(g, temperature_kelvin);
        out.p_lz.push(lz);
        out.p_thermal.push(th);
        out.p_total.push(p_total(lz, th));
    }
    out.max_p_total = (0..out.p_total.len())
        .max_by(|&a, &b| out.p_total[a].total_cmp(&out.p_total[b]).then(b.cmp(&a)))
        .map(|k| (out.s_grid[k], out.p_total[k]));
    Ok(out)
}
