//! Report schema.  Reports are serialized with a fixed field order and no
//! wall-clock data, so identical configs produce byte-identical files.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::factor::VerificationReport;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSummary {
    /// 1-based flat coordinate pairs, construction order
    pub pairs: Vec<(usize, usize)>,
    /// construction row per block (all 1 for flat spaces)
    pub rows: Vec<usize>,
    pub etas: Vec<f64>,
    pub past_achieved: Vec<f64>,
    /// worst row for two-parameter systems
    pub future_achieved: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub failure: Option<StageFailure>,
    pub blocks: Option<BlockSummary>,
    pub verification: Option<VerificationReport>,
    /// result of the rational certificate recheck, when requested
    pub exact_recheck: Option<bool>,
    pub verdict: bool,
    /// excluded from serialization: reports must be reproducible
    #[serde(skip)]
    pub wall_time_ms: u128,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub schema_version: u32,
    pub total: usize,
    pub passed: usize,
    /// 0-based indices of failing runs, in config order
    pub failed_runs: Vec<usize>,
    pub worst_residual: Option<f64>,
}

pub fn summarize(reports: &[RunReport]) -> BatchSummary {
    let failed_runs: Vec<usize> = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.verdict)
        .map(|(i, _)| i)
        .collect();
    let worst_residual = reports
        .iter()
        .filter_map(|r| r.verification.as_ref().map(|v| v.residual_identity))
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    BatchSummary {
        schema_version: super::config::SCHEMA_VERSION,
        total: reports.len(),
        passed: reports.len() - failed_runs.len(),
        failed_runs,
        worst_residual,
    }
}

impl BatchSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary is serializable");
        s.push('\n');
        s
    }
}
