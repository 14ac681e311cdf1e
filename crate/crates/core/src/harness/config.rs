use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::DEFAULT_P_SUCCESS;
use crate::embedding::EmbedConfig;
use crate::error::{Error, Result};
use crate::parameterize::{ParamConfig, ProblemKind};
use crate::qubo::{GppPenalty, DEFAULT_MVCP_A, DEFAULT_MVCP_B};
use crate::sampling::SaParams;
use crate::topology::{gen_chimera, load_hardware, HardwareGraph};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MtqaIsolated,
    MtqaNonisolated,
    Pqa,
    QaSingle,
    SaLogical,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::MtqaIsolated, Mode::MtqaNonisolated, Mode::Pqa, Mode::QaSingle, Mode::SaLogical];

    pub fn name(self) -> &'static str {
        match self {
            Mode::MtqaIsolated => "mtqa-isolated",
            Mode::MtqaNonisolated => "mtqa-nonisolated",
            Mode::Pqa => "pqa",
            Mode::QaSingle => "qa-single",
            Mode::SaLogical => "sa-logical",
        }
    }

    /// Fixed per-mode stream, so adding a mode leaves the others' seeds alone.
    pub(crate) fn stream(self) -> u64 {
        match self {
            Mode::MtqaIsolated => 1,
            Mode::MtqaNonisolated => 2,
            Mode::Pqa => 3,
            Mode::QaSingle => 4,
            Mode::SaLogical => 5,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`; expected one of mtqa-isolated, mtqa-nonisolated, pqa, qa-single, sa-logical")))
    }
}

/// A batch of random instances of one kind and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    #[serde(default = "default_edge_probability")]
    pub p: f64,
    /// One instance per seed.
    pub seeds: Vec<u64>,
}

fn default_edge_probability() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Chimera { rows: usize, cols: usize, shore: usize },
    File { path: PathBuf },
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Chimera {
            rows: 16,
            cols: 16,
            shore: 4,
        }
    }
}

impl TopologySpec {
    pub fn build(&self) -> Result<HardwareGraph> {
        match self {
            TopologySpec::Chimera { rows, cols, shore } => gen_chimera(*rows, *cols, *shore),
            TopologySpec::File { path } => load_hardware(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TopologySpec::Chimera { rows, cols, shore } => format!("chimera({rows},{cols},{shore})"),
            TopologySpec::File { path } => path.display().to_string(),
        }
    }
}

impl FromStr for TopologySpec {
    type Err = Error;

    /// `chimera:R,C,S` or a hardware file path.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(dims) = s.strip_prefix("chimera:") {
            let v: Vec<usize> = dims
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad chimera dimensions `{dims}`")))?;
            return match v[..] {
                [rows, cols, shore] => Ok(TopologySpec::Chimera { rows, cols, shore }),
                _ => Err(Error::Config(format!("chimera needs rows,cols,shore, got `{dims}`"))),
            };
        }
        Ok(TopologySpec::File { path: s.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuboSettings {
    pub mvcp_a: f64,
    pub mvcp_b: f64,
    pub gpp_b: f64,
    pub gpp_penalty: GppPenalty,
}

impl Default for QuboSettings {
    fn default() -> Self {
        QuboSettings {
            mvcp_a: DEFAULT_MVCP_A,
            mvcp_b: DEFAULT_MVCP_B,
            gpp_b: 1.0,
            gpp_penalty: GppPenalty::Balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub problems: Vec<ProblemSpec>,
    #[serde(default)]
    pub topology: TopologySpec,
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub sampler: SaParams,
    #[serde(default)]
    pub embedding: EmbedConfig,
    #[serde(default)]
    pub parameters: ParamConfig,
    #[serde(default)]
    pub qubo: QuboSettings,
    #[serde(default = "default_p_success")]
    pub p_success: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_p_success() -> f64 {
    DEFAULT_P_SUCCESS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.modes.is_empty() {
            return bad("no modes selected".into());
        }
        if self.problems.is_empty() {
            return bad("no problems configured".into());
        }
        for (k, p) in self.problems.iter().enumerate() {
            if p.n == 0 || p.seeds.is_empty() || !(0.0..=1.0).contains(&p.p) {
                return bad(format!("problem spec {k} needs n >= 1, at least one seed and p in [0, 1]"));
            }
        }
        if self.sampler.reads == 0 || self.sampler.sweeps == 0 {
            return bad("sampler reads and sweeps must be at least 1".into());
        }
        if !(self.p_success > 0.0 && self.p_success < 1.0) {
            return bad(format!("p_success must lie in (0, 1), got {}", self.p_success));
        }
        for m in &self.modes {
            if self.modes.iter().filter(|x| *x == m).count() > 1 {
                return bad(format!("mode {m} listed twice"));
            }
        }
        Ok(())
    }
}
