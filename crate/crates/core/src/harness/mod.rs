//! Prompting strategies, answer extraction and scoring.

mod prompts;
mod runner;
mod scoring;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use prompts::{
    render_critique_prompt, render_revise_prompt, render_strategy_prompt, Demo, COT_TRIGGER,
    OUTPUT_FORMAT,
};
pub use runner::{run_strategy, ItemPrompt, RunContext};
pub use scoring::{
    extract_answer, majority_vote, mean_score, score_accuracy, score_token_f1, Metric,
};

pub const DEFAULT_MAX_TOKENS: u32 = 3000;
pub const DEFAULT_SC_SAMPLES: u32 = 5;
pub const DEFAULT_SC_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    ZeroShot,
    ZeroShotCot,
    FewShotCot,
    SelfRefine,
    SelfConsistency,
}

impl StrategyName {
    pub const ALL: [StrategyName; 5] = [
        StrategyName::ZeroShot,
        StrategyName::ZeroShotCot,
        StrategyName::FewShotCot,
        StrategyName::SelfRefine,
        StrategyName::SelfConsistency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::ZeroShot => "zero_shot",
            StrategyName::ZeroShotCot => "zero_shot_cot",
            StrategyName::FewShotCot => "few_shot_cot",
            StrategyName::SelfRefine => "self_refine",
            StrategyName::SelfConsistency => "self_consistency",
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        StrategyName::ALL
            .into_iter()
            .find(|n| n.as_str() == norm)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub name: StrategyName,
    pub temperature: f64,
    pub max_tokens: u32,
    pub sc_samples: u32,
    pub sc_temperature: f64,
    pub refine_rounds: u32,
    /// Demonstrations for few-shot prompting; one built-in demo when empty.
    pub demos: Vec<Demo>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            name: StrategyName::ZeroShot,
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            sc_samples: DEFAULT_SC_SAMPLES,
            sc_temperature: DEFAULT_SC_TEMPERATURE,
            refine_rounds: 1,
            demos: Vec::new(),
        }
    }
}

impl StrategyConfig {
    pub fn new(name: StrategyName) -> Self {
        StrategyConfig {
            name,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sc_samples < 1 {
            return Err(Error::InvalidConfig("sc_samples must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.sc_temperature >= 0.0) {
            return Err(Error::InvalidConfig(
                "temperatures must be non-negative".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidConfig("max_tokens must be positive".into()));
        }
        Ok(())
    }
}
