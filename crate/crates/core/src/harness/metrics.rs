//! Ground-state probability, time-to-solution and run-time apportioning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_P_SUCCESS: f64 = 0.99;

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Mean of the per-instance optimal-hit probabilities.
pub fn gsp(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("ground-state probability of no instances".into()));
    }
    for &v in p {
        probability("hit probability", v)?;
    }
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

/// `t_run · ln(1 - p_success) / ln(1 - p_avg)`. `None` when `p_avg = 0`,
/// where no number of runs reaches the target; `p_avg = 1` gives `t_run`.
pub fn tts(t_run: f64, p_avg: f64, p_success: f64) -> Result<Option<f64>> {
    if !(t_run > 0.0 && t_run.is_finite()) {
        return Err(Error::InvalidArgument(format!("run time must be positive, got {t_run}")));
    }
    probability("average success probability", p_avg)?;
    if !(p_success > 0.0 && p_success < 1.0) {
        return Err(Error::InvalidArgument(format!("target success probability must lie in (0, 1), got {p_success}")));
    }
    if p_avg == 0.0 {
        return Ok(None);
    }
    if p_avg == 1.0 || p_avg == p_success {
        return Ok(Some(t_run));
    }
    Ok(Some(t_run * (1.0 - p_success).ln() / (1.0 - p_avg).ln()))
}

/// `(T / (n_mvcp + n_gpp) + Σ U_i) / reads`, with `T` the sampler wall time
/// standing in for device access time.
pub fn t_run(reads: usize, sampler_seconds: f64, n_mvcp: usize, n_gpp: usize, unembed_seconds: &[f64]) -> Result<f64> {
    if reads == 0 {
        return Err(Error::InvalidArgument("run time needs at least one read".into()));
    }
    let n = n_mvcp + n_gpp;
    if n == 0 {
        return Err(Error::InvalidArgument("run time needs at least one instance".into()));
    }
    Ok((sampler_seconds / n as f64 + unembed_seconds.iter().sum::<f64>()) / reads as f64)
}

/// Minimum, quartiles and maximum by linear interpolation between order
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quartiles {
            min: v[0],
            q1: at(0.25),
            median: at(0.5),
            q3: at(0.75),
            max: v[v.len() - 1],
        })
    }
}
