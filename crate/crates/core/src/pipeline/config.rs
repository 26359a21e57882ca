use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::ModelHandle;
use crate::harness::{Metric, StrategyConfig};
use crate::hybrid::SplitSpec;
use crate::taxonomy::VariantKind;

pub const DEFAULT_BASE_PROMPT: &str =
    "You are an expert problem solver. Read the question carefully, reason accurately, and answer precisely.";

/// Model bindings for the three roles. The analyzer diagnoses failures,
/// the synthesizer writes enhancements, the evaluator answers questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub analyzer: ModelHandle,
    pub synthesizer: ModelHandle,
    pub evaluator: ModelHandle,
}

impl Default for Models {
    fn default() -> Self {
        let h = ModelHandle::mock("gpt-3.5-turbo").with_prices(0.0005, 0.0015);
        Models {
            analyzer: h.clone(),
            synthesizer: h.clone(),
            evaluator: h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig {
            train: s.train_ratio,
            val: s.val_ratio,
            test: s.test_ratio,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_ratio: self.train,
            val_ratio: self.val,
            test_ratio: self.test,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Label written into run records.
    pub dataset_name: String,
    pub base_prompt: String,
    pub metric: Metric,
    pub models: Models,
    pub strategy: StrategyConfig,
    pub split: SplitConfig,
    pub variants: Vec<VariantKind>,
    pub default_variant: VariantKind,
    /// Upper bound on concurrent provider requests.
    pub max_in_flight: usize,
    /// Optional request rate cap, per second.
    pub requests_per_second: Option<f64>,
    pub max_reasks: u32,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dataset_name: "dataset".into(),
            base_prompt: DEFAULT_BASE_PROMPT.into(),
            metric: Metric::Accuracy,
            models: Models::default(),
            strategy: StrategyConfig::default(),
            split: SplitConfig::default(),
            variants: VariantKind::ALL.to_vec(),
            default_variant: VariantKind::Concise,
            max_in_flight: 8,
            requests_per_second: None,
            max_reasks: 2,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.split.spec(0).validate()?;
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one variant is required".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidConfig(
                "max_in_flight must be positive".into(),
            ));
        }
        for h in [
            &self.models.analyzer,
            &self.models.synthesizer,
            &self.models.evaluator,
        ] {
            if !(h.price_per_1k_input >= 0.0 && h.price_per_1k_output >= 0.0)
                || h.timeout_seconds == 0
            {
                return Err(Error::InvalidConfig(format!(
                    "{}: prices must be >= 0 and timeout > 0",
                    h.model_name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendKind;
    use crate::harness::StrategyName;

    #[test]
    fn toml_round_trip_and_partial() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<Config>(&text).unwrap(), c);

        let partial: Config = toml::from_str(
            r#"
            dataset_name = "mmlu"
            [strategy]
            name = "zero_shot_cot"
            [models.analyzer]
            backend = "http"
            model_name = "gpt-4o"
            endpoint = "http://localhost:8000/v1"
            [models.synthesizer]
            backend = "mock"
            model_name = "s"
            [models.evaluator]
            backend = "mock"
            model_name = "e"
            "#,
        )
        .unwrap();
        assert_eq!(partial.strategy.name, StrategyName::ZeroShotCot);
        assert_eq!(partial.models.analyzer.backend, BackendKind::Http);
        assert_eq!(partial.models.analyzer.timeout_seconds, 30);
        assert_eq!(partial.split, SplitConfig::default());
        partial.validate().unwrap();
    }

    #[test]
    fn rejects_bad_split() {
        let c = Config {
            split: SplitConfig {
                train: 0.5,
                val: 0.1,
                test: 0.1,
            },
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }
}
