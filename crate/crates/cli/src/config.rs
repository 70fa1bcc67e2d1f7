//! Run configuration shared by all subcommands.
//!
//! Every section is optional in the JSON file; missing fields take module
//! defaults. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use neurodyn_core::arm::{ArmParams, ReachScript};
use neurodyn_core::edm::{EmbeddingConfig, Split};
use neurodyn_core::emg::EnvelopeConfig;
use neurodyn_core::reward::RewardWeights;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub envelope: EnvelopeConfig,
    pub reward: RewardWeights,
    pub edm: EdmSection,
    pub pca: PcaSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdmSection {
    pub embedding: EmbeddingConfig,
    #[serde(rename = "E_range")]
    pub e_range: Option<IntRange>,
    pub tau_range: Option<IntRange>,
    #[serde(rename = "Tp_range")]
    pub tp_range: Option<IntRange>,
    pub split: Split,
}

impl Default for EdmSection {
    fn default() -> Self {
        Self {
            embedding: EmbeddingConfig::default(),
            e_range: None,
            tau_range: None,
            tp_range: None,
            split: Split::LeaveOneTrialOut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaSection {
    pub n_components: usize,
}

impl Default for PcaSection {
    fn default() -> Self {
        Self { n_components: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub script: ReachScript,
    pub arm: ArmParams,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))
    }
}

/// Inclusive integer range written `a..b`; `b` may be below `a`, as in `-1..-4`.
/// A bare integer is a one-element range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IntRange {
    pub start: i64,
    pub end: i64,
}

impl IntRange {
    pub fn values(&self) -> Vec<i64> {
        if self.start <= self.end {
            (self.start..=self.end).collect()
        } else {
            (self.end..=self.start).rev().collect()
        }
    }
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| format!("invalid range `{s}`, expected `a..b`"))
        };
        match s.split_once("..") {
            Some((a, b)) => Ok(Self {
                start: parse(a)?,
                end: parse(b.strip_prefix('=').unwrap_or(b))?,
            }),
            None => {
                let v = parse(s)?;
                Ok(Self { start: v, end: v })
            }
        }
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl TryFrom<String> for IntRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<IntRange> for String {
    fn from(r: IntRange) -> Self {
        r.to_string()
    }
}
