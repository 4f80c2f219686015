//! Run configuration: TOML in, validated SpaceSpec and recipes out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annihilate::PastStrategy;
use crate::seqspace::{Exp, SpaceError, SpaceSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("cannot parse space string {0:?}; expected lp:<p>:<dim>, linf:<dim> or lpsum:<p>:<outer>:<q>:<inner>")]
    SpaceString(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceConfig {
    Lp {
        p: Exp,
        dim: usize,
    },
    LpSum {
        p_outer: Exp,
        outer_dim: usize,
        inner_p: Exp,
        inner_dim: usize,
    },
}

impl SpaceConfig {
    pub fn to_space(&self) -> Result<SpaceSpec, SpaceError> {
        match self {
            SpaceConfig::Lp { p, dim } => SpaceSpec::lp(*p, *dim),
            SpaceConfig::LpSum {
                p_outer,
                outer_dim,
                inner_p,
                inner_dim,
            } => SpaceSpec::lp_sum(*p_outer, *outer_dim, SpaceSpec::lp(*inner_p, *inner_dim)?),
        }
    }
}

/// Compact command-line syntax: `lp:2:64`, `linf:2048`,
/// `lpsum:1:16:inf:512`.
pub fn parse_space_str(s: &str) -> Result<SpaceSpec, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || ConfigError::SpaceString(s.to_string());
    let exp = |t: &str| t.parse::<Exp>().map_err(|_| bad());
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        ["linf", dim] => Ok(SpaceSpec::linf(num(dim)?)?),
        ["lp", p, dim] => Ok(SpaceSpec::lp(exp(p)?, num(dim)?)?),
        ["lpsum", p, outer, q, inner] => Ok(SpaceSpec::lp_sum(
            exp(p)?,
            num(outer)?,
            SpaceSpec::lp(exp(q)?, num(inner)?)?,
        )?),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GeneratorConfig {
    pub name: String,
    pub density: Option<f64>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub norm_cap: Option<f64>,
    pub path: Option<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            name: "identity".into(),
            density: None,
            k: None,
            c: None,
            norm_cap: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    pub residual: f64,
    pub crucial_identity: f64,
    pub norm_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-9,
            crucial_identity: 1e-10,
            norm_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub space: SpaceConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    pub target_blocks: usize,
    #[serde(default)]
    pub min_retained: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_strategy")]
    pub strategy: PastStrategy,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// recheck certificates in exact rational arithmetic
    #[serde(default)]
    pub exact: bool,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_strategy() -> PastStrategy {
    PastStrategy::BestPair
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub runs: Vec<RunConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

impl BatchConfig {
    pub fn from_toml(text: &str) -> Result<BatchConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}
