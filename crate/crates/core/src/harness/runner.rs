use super::prompts::{render_critique_prompt, render_revise_prompt, render_strategy_prompt};
use super::scoring::{extract_answer, majority_vote, Metric};
use super::{StrategyConfig, StrategyName};
use crate::gateway::{ChatRequest, Completion, Gateway, GatewayError, Role};
use crate::par::map_ordered;
use crate::taxonomy::{Arm, BenchmarkItem, EnhancedPrompt, RunRecord, VariantKind};

/// The leading prompt text for one item, with the variant it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemPrompt<'a> {
    pub text: &'a str,
    pub variant: Option<VariantKind>,
}

impl<'a> ItemPrompt<'a> {
    pub fn base(text: &'a str) -> Self {
        ItemPrompt {
            text,
            variant: None,
        }
    }

    pub fn enhanced(prompt: &'a EnhancedPrompt) -> Self {
        ItemPrompt {
            text: prompt.full_text(),
            variant: Some(prompt.variant()),
        }
    }
}

/// Labels and knobs shared by every record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub dataset: String,
    pub arm: Arm,
    pub metric: Metric,
    pub parallelism: usize,
}

impl RunContext {
    pub fn new(dataset: impl Into<String>, arm: Arm) -> Self {
        RunContext {
            dataset: dataset.into(),
            arm,
            metric: Metric::Accuracy,
            parallelism: 1,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism;
        self
    }
}

#[derive(Default)]
struct Tally {
    prompt_tokens: u64,
    completion_tokens: u64,
    cost_usd: f64,
}

impl Tally {
    fn call(&mut self, gw: &Gateway, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let c = gw.chat(Role::Evaluation, req)?;
        self.prompt_tokens += c.usage.prompt_tokens;
        self.completion_tokens += c.usage.completion_tokens;
        self.cost_usd += c.cost_usd;
        Ok(c)
    }
}

struct Outcome {
    raw: String,
    answer: crate::Result<String>,
}

fn run_item(
    config: &StrategyConfig,
    item: &BenchmarkItem,
    system: &str,
    gw: &Gateway,
    tally: &mut Tally,
) -> Result<Outcome, GatewayError> {
    let prompt = render_strategy_prompt(config, item, system);
    let req = ChatRequest::user(&prompt, config.temperature, config.max_tokens);
    match config.name {
        StrategyName::ZeroShot | StrategyName::ZeroShotCot | StrategyName::FewShotCot => {
            let c = tally.call(gw, &req)?;
            let answer = extract_answer(&c.text, &item.options);
            Ok(Outcome {
                raw: c.text,
                answer,
            })
        }
        StrategyName::SelfConsistency => {
            let mut raws = Vec::new();
            let mut answers = Vec::new();
            for i in 0..config.sc_samples {
                let req = ChatRequest::user(&prompt, config.sc_temperature, config.max_tokens)
                    .with_sample(i);
                let c = tally.call(gw, &req)?;
                if let Ok(a) = extract_answer(&c.text, &item.options) {
                    answers.push(a);
                }
                raws.push(c.text);
            }
            let answer = majority_vote(&answers).map_err(|_| crate::Error::EmptyCompletion);
            Ok(Outcome {
                raw: raws.join("\n---\n"),
                answer,
            })
        }
        StrategyName::SelfRefine => {
            let first = tally.call(gw, &req)?;
            let mut current = first.text;
            let mut answer = extract_answer(&current, &item.options);
            for _ in 0..config.refine_rounds {
                let critique_req = ChatRequest::user(
                    render_critique_prompt(item, system, &current),
                    config.temperature,
                    config.max_tokens,
                );
                let critique = tally.call(gw, &critique_req)?;
                let revise_req = ChatRequest::user(
                    render_revise_prompt(item, system, &current, &critique.text),
                    config.temperature,
                    config.max_tokens,
                );
                let revised = tally.call(gw, &revise_req)?;
                if let Ok(a) = extract_answer(&revised.text, &item.options) {
                    answer = Ok(a);
                    current = revised.text;
                }
            }
            Ok(Outcome {
                raw: current,
                answer,
            })
        }
    }
}

/// Runs `config` over `items`, one record per item in input order.
/// `prompts` is either one prompt for every item or one per item. Provider
/// and extraction failures score 0 with the error recorded.
pub fn run_strategy(
    config: &StrategyConfig,
    items: &[BenchmarkItem],
    prompts: &[ItemPrompt<'_>],
    gateway: &Gateway,
    ctx: &RunContext,
) -> Vec<RunRecord> {
    assert!(
        prompts.len() == 1 || prompts.len() == items.len(),
        "need one prompt or one per item ({} prompts, {} items)",
        prompts.len(),
        items.len()
    );
    let indexed: Vec<usize> = (0..items.len()).collect();
    map_ordered(ctx.parallelism, &indexed, |&i| {
        let item = &items[i];
        let prompt = if prompts.len() == 1 {
            prompts[0]
        } else {
            prompts[i]
        };
        let mut tally = Tally::default();
        let (raw, extracted, score, error) =
            match run_item(config, item, prompt.text, gateway, &mut tally) {
                Ok(Outcome { raw, answer: Ok(a) }) => {
                    let score = ctx.metric.score(&a, &item.answer, &item.options);
                    (raw, a, score, None)
                }
                Ok(Outcome {
                    raw,
                    answer: Err(e),
                }) => (raw, String::new(), 0.0, Some(e.to_string())),
                Err(e) => (String::new(), String::new(), 0.0, Some(e.to_string())),
            };
        RunRecord {
            dataset: ctx.dataset.clone(),
            strategy: config.name.as_str().to_string(),
            arm: ctx.arm,
            variant: prompt.variant,
            question_id: item.id.clone(),
            category: item.category.clone(),
            raw_completion: raw,
            extracted_answer: extracted,
            score,
            prompt_tokens: tally.prompt_tokens,
            completion_tokens: tally.completion_tokens,
            cost_usd: tally.cost_usd,
            error,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CostLedger, MockBackend, MockRule, MockScript, ModelHandle};
    use std::sync::Arc;

    fn items(n: usize) -> Vec<BenchmarkItem> {
        (0..n)
            .map(|i| BenchmarkItem {
                id: format!("q{i}"),
                question: format!("question number {i}"),
                options: vec!["w".into(), "x".into(), "y".into()],
                answer: "A".into(),
                category: "c".into(),
            })
            .collect()
    }

    fn gateway(script: MockScript) -> Gateway {
        Gateway::new(
            ModelHandle::mock("eval"),
            Arc::new(MockBackend::new(script)),
            Arc::new(CostLedger::new()),
        )
    }

    fn wrap(a: &str) -> String {
        format!("<answer>{a}</answer>")
    }

    #[test]
    fn self_consistency_votes() {
        let gw =
            gateway(MockScript::new(0).rule(MockRule::any(["A", "A", "B", "A", "C"].map(wrap))));
        let recs = run_strategy(
            &StrategyConfig::new(StrategyName::SelfConsistency),
            &items(1),
            &[ItemPrompt::base("")],
            &gw,
            &RunContext::new("d", Arm::Baseline),
        );
        assert_eq!(recs[0].extracted_answer, "A");
        assert_eq!(recs[0].score, 1.0);
        assert_eq!(gw.ledger().len(), 5);
    }

    #[test]
    fn self_refine_fixed_point() {
        let gw = gateway(
            MockScript::new(0)
                .rule(MockRule::contains(
                    &["Review the previous"],
                    ["Looks right."],
                ))
                .with_default(wrap("B")),
        );
        let recs = run_strategy(
            &StrategyConfig::new(StrategyName::SelfRefine),
            &items(1),
            &[ItemPrompt::base("")],
            &gw,
            &RunContext::new("d", Arm::Baseline),
        );
        assert_eq!(recs[0].extracted_answer, "B");
        assert_eq!(recs[0].score, 0.0);
        assert_eq!(gw.ledger().len(), 3);
    }

    #[test]
    fn reproducible_and_errors_recorded() {
        let script = || {
            MockScript::new(0)
                .rule(MockRule::contains(&["number 3"], ["   "]))
                .with_default(wrap("A"))
        };
        let cfg = StrategyConfig::new(StrategyName::ZeroShot);
        let ctx = RunContext::new("d", Arm::Baseline).with_parallelism(4);
        let a = run_strategy(
            &cfg,
            &items(10),
            &[ItemPrompt::base("sys")],
            &gateway(script()),
            &ctx,
        );
        let b = run_strategy(
            &cfg,
            &items(10),
            &[ItemPrompt::base("sys")],
            &gateway(script()),
            &ctx,
        );
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|r| r.score == 1.0).count(), 9);
        assert!(a[3].error.is_some());
        assert!(a.iter().all(|r| r.prompt_tokens > 0));

        let gw = gateway(MockScript::new(0));
        let recs = run_strategy(
            &cfg,
            &items(2),
            &[ItemPrompt::base("")],
            &gw,
            &RunContext::new("d", Arm::Baseline),
        );
        assert!(recs.iter().all(|r| r.score == 0.0 && r.error.is_some()));
    }
}
