//! Run every prompting strategy over two items against a scripted model,
//! and show answer extraction, voting and F1 scoring on their own.

use std::sync::Arc;

use mars::gateway::{CostLedger, Gateway, MockBackend, MockRule, MockScript, ModelHandle};
use mars::harness::{
    extract_answer, majority_vote, run_strategy, score_token_f1, ItemPrompt, RunContext,
    StrategyConfig, StrategyName,
};
use mars::taxonomy::{Arm, BenchmarkItem};

fn main() -> mars::Result<()> {
    println!("{}", extract_answer("<reasoning>3 * 4</reasoning>\n<answer>The answer is 12.</answer>", &[])?);
    println!("{}", majority_vote(&["12", " 12", "13", "twelve"])?);
    println!("{:.3}", score_token_f1("the Eiffel Tower, Paris", "Eiffel tower"));

    let items = vec![
        BenchmarkItem {
            id: "mul".into(),
            question: "What is 3 times 4?".into(),
            options: vec![],
            answer: "12".into(),
            category: "arith".into(),
        },
        BenchmarkItem {
            id: "cap".into(),
            question: "Which city is the capital of France?".into(),
            options: vec!["Lyon".into(), "Paris".into(), "Nice".into()],
            answer: "B".into(),
            category: "geo".into(),
        },
    ];
    // the multiplication rule answers 12, 12, 7 in rotation across all
    // calls, so one single-shot run lands on 7 while the vote still says 12
    let script = MockScript::new(0)
        .rule(MockRule::contains(&["Review the previous response"], ["Looks right."]))
        .rule(MockRule::contains(&["3 times 4"], ["<answer>12</answer>", "<answer>12</answer>", "<answer>7</answer>"]).exhausted(mars::gateway::Exhaustion::Cycle))
        .rule(MockRule::contains(&["capital of France"], ["<answer>Paris</answer>"]));
    let ledger = Arc::new(CostLedger::new());
    let gw = Gateway::new(
        ModelHandle::mock("gpt-3.5-turbo").with_prices(0.0005, 0.0015),
        Arc::new(MockBackend::new(script)),
        ledger.clone(),
    );
    let base = "You are a careful problem solver.";
    for name in StrategyName::ALL {
        let records = run_strategy(
            &StrategyConfig::new(name),
            &items,
            &[ItemPrompt::base(base)],
            &gw,
            &RunContext::new("demo", Arm::Baseline),
        );
        let answers: Vec<String> = records.iter().map(|r| format!("{}={} ({})", r.question_id, r.extracted_answer, r.score)).collect();
        println!("{name:<18} {}", answers.join("  "));
    }
    println!("{} calls, ${:.6}", ledger.len(), ledger.total_cost_usd());
    Ok(())
}
