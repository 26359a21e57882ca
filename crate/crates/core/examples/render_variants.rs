//! Synthesize enhancements for two groups with a scripted synthesizer and
//! render the concise, reasoning and specific prompt variants.

use std::sync::Arc;

use mars::allocation::group_by_type_topic;
use mars::gateway::{CostLedger, Gateway, MockBackend, MockRule, MockScript, ModelHandle};
use mars::synthesis::{render_enhanced_prompts, synthesize_all, SynthesisOptions};
use mars::taxonomy::{ErrorType, FailureAnalysis, QuestionType, VariantKind};

fn main() -> mars::Result<()> {
    let analyses: Vec<FailureAnalysis> = (0..5)
        .map(|i| FailureAnalysis {
            question_id: format!("q{i}"),
            question_type: if i < 3 { QuestionType::Calculation } else { QuestionType::Factual },
            topics: vec![if i < 3 { "kinematics" } else { "astronomy" }.into()],
            error_type: ErrorType::CalculationError,
            root_cause: "dropped units".into(),
            specific_mistake: "mixed km and m".into(),
            requires_knowledge: vec![],
            difficulty_factors: vec![],
        })
        .collect();
    let groups = group_by_type_topic(&analyses)?;

    let reply = r#"{"key_warnings": ["Carry units through every step"],
        "common_mistakes": ["Mixing km and m"],
        "verification_steps": ["Check the units of the final answer"],
        "type_specific_approach": "Convert everything to SI first",
        "enhanced_prompt_addition": "Write units next to every number."}"#;
    let synthesizer = Gateway::new(
        ModelHandle::mock("synthesizer"),
        Arc::new(MockBackend::new(MockScript::new(0).rule(MockRule::any([reply])))),
        Arc::new(CostLedger::new()),
    );
    let outcome = synthesize_all(&groups, &synthesizer, &SynthesisOptions::default())?;

    let base = "Answer the question. End with <answer>X</answer>.";
    for (kind, prompt) in render_enhanced_prompts(base, &outcome.enhancements, "physics", &VariantKind::ALL)? {
        println!("===== {kind} =====\n{}", prompt.full_text());
    }
    Ok(())
}
