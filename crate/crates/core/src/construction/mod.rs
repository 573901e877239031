//! Executable simulation of ELIZA as an attention program.
//!
//! Every feature is computed position by position from causal selectors over
//! earlier positions, so a context can be extended one token at a time with
//! earlier features left untouched (the residual-stream discipline). Values
//! are exact integers, booleans and rationals; the position-wise lookup tables
//! of the construction become plain functions.

pub mod copying;
pub mod matching;
pub mod primitives;
pub mod program;
pub mod state;
pub mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use copying::{copy_induction, copy_position, Action};
pub use matching::{correct_labels, match_templates, reduce_layers, LayerPlan};
pub use primitives::{aggregate, select, selector_width, Selector};
pub use program::{decode, forward, Decoded, Program, TraceRecord};
pub use state::{memory_gridworld, memory_intermediate, MemoryDecision, QueueEvent};
pub use tensor::{segment, SeqTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Copying {
    PositionBased,
    InductionHead { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cycling {
    ModularPrefixSum,
    IntermediateOutputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Memory {
    Gridworld { s: usize },
    IntermediateOutputs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismConfig {
    pub copying: Copying,
    pub cycling: Cycling,
    pub memory: Memory,
    pub max_segments: usize,
    pub max_segment_length: usize,
    pub enqueue_ceiling: usize,
    /// Apply the generation-time label correction.
    pub correct_labels: bool,
    /// Match with one layer per wildcard instead of one per symbol.
    pub reduced_layers: bool,
    pub head_budget: usize,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        MechanismConfig {
            copying: Copying::PositionBased,
            cycling: Cycling::IntermediateOutputs,
            memory: Memory::IntermediateOutputs,
            max_segments: 256,
            max_segment_length: 64,
            enqueue_ceiling: state::DEFAULT_ENQUEUE_CEILING,
            correct_labels: true,
            reduced_layers: false,
            head_budget: matching::DEFAULT_HEAD_BUDGET,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid mechanism config: {0}")]
pub struct ConfigError(pub String);

impl MechanismConfig {
    /// Position-based copying with intermediate-output cycling and memory.
    pub fn faithful() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Copying::InductionHead { n: 0 } = self.copying {
            return Err(ConfigError("induction window must be at least 1".into()));
        }
        if let Memory::Gridworld { s: 0 } = self.memory {
            return Err(ConfigError("gridworld needs at least one state".into()));
        }
        if self.max_segments == 0 || self.max_segment_length == 0 || self.enqueue_ceiling == 0 {
            return Err(ConfigError("capacities must be at least 1".into()));
        }
        if self.head_budget == 0 {
            return Err(ConfigError("head budget must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Copying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Copying::PositionBased => f.write_str("position"),
            Copying::InductionHead { n } => write!(f, "induction:{n}"),
        }
    }
}

impl fmt::Display for Cycling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cycling::ModularPrefixSum => "modular",
            Cycling::IntermediateOutputs => "intermediate",
        })
    }
}

impl fmt::Display for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Memory::Gridworld { s } => write!(f, "gridworld:{s}"),
            Memory::IntermediateOutputs => f.write_str("intermediate"),
        }
    }
}

fn parse_param(s: &str, name: &str) -> Result<Option<usize>, ConfigError> {
    match s.strip_prefix(name) {
        Some("") => Ok(None),
        Some(rest) => rest
            .strip_prefix(':')
            .and_then(|n| n.parse().ok())
            .map(Some)
            .ok_or_else(|| ConfigError(format!("bad parameter in `{s}`"))),
        None => Err(ConfigError(format!("unknown mechanism `{s}`"))),
    }
}

impl FromStr for Copying {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "position" {
            return Ok(Copying::PositionBased);
        }
        Ok(Copying::InductionHead { n: parse_param(s, "induction")?.unwrap_or(2) })
    }
}

impl FromStr for Cycling {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modular" => Ok(Cycling::ModularPrefixSum),
            "intermediate" => Ok(Cycling::IntermediateOutputs),
            _ => Err(ConfigError(format!("unknown cycling mechanism `{s}`"))),
        }
    }
}

impl FromStr for Memory {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "intermediate" {
            return Ok(Memory::IntermediateOutputs);
        }
        Ok(Memory::Gridworld { s: parse_param(s, "gridworld")?.unwrap_or(4) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanism_strings_round_trip() {
        for c in ["position", "induction:3"] {
            assert_eq!(c.parse::<Copying>().unwrap().to_string(), c);
        }
        for c in ["modular", "intermediate"] {
            assert_eq!(c.parse::<Cycling>().unwrap().to_string(), c);
        }
        for c in ["gridworld:4", "intermediate"] {
            assert_eq!(c.parse::<Memory>().unwrap().to_string(), c);
        }
        assert_eq!("induction".parse::<Copying>().unwrap(), Copying::InductionHead { n: 2 });
        assert!("gridworld:x".parse::<Memory>().is_err());
        assert!("fifo".parse::<Memory>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MechanismConfig::faithful().validate().is_ok());
        let cfg = MechanismConfig { copying: Copying::InductionHead { n: 0 }, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
