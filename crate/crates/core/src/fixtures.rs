//! Deterministic demo data: a small two-category dataset with two planted
//! failure patterns, and a mock script that answers every model role
//! for it.
//!
//! Physics items tagged `Q-ENT` fail as entropy calculations and biology
//! items tagged `Q-GEN` fail as inheritance concepts. A few noise items
//! fail with one-off diagnoses. The evaluator answers correctly under the
//! reasoning variant for physics and under the concise variant for
//! biology, and wrongly under the other of the two.

use crate::gateway::{MockRule, MockScript};
use crate::harness::{StrategyConfig, StrategyName};
use crate::pipeline::Config;
use crate::taxonomy::{BenchmarkItem, QuestionType, TypeTopicKey};

const OPTIONS: [&str; 4] = ["12 units", "18 units", "24 units", "36 units"];

fn item(category: &str, idx: usize, tag: &str) -> BenchmarkItem {
    BenchmarkItem {
        id: format!("{category}-{idx:02}"),
        question: format!("(subject: {category}) Item {idx} {tag}: choose the value that satisfies the stated conditions."),
        options: OPTIONS.iter().map(|s| s.to_string()).collect(),
        answer: "B".into(),
        category: category.into(),
    }
}

/// 40 items: 20 physics, 20 biology.
pub fn planted_dataset() -> Vec<BenchmarkItem> {
    let mut items = Vec::new();
    for i in 0..20 {
        let tag = match i {
            0..=3 => "Q-ENT",
            4..=7 => "Q-ENT-SWAP",
            8 => "Q-NOISE-OPTICS",
            9 => "Q-NOISE-ACOUSTICS",
            _ => "Q-OK",
        };
        items.push(item("physics", i, tag));
    }
    for i in 0..20 {
        let tag = match i {
            0..=6 => "Q-GEN",
            7 => "Q-NOISE-ECOLOGY",
            8 => "Q-NOISE-BOTANY",
            _ => "Q-OK",
        };
        items.push(item("biology", i, tag));
    }
    items
}

/// The two planted type-topic keys.
pub fn planted_keys() -> [TypeTopicKey; 2] {
    [
        TypeTopicKey::new(QuestionType::Calculation, ["thermodynamics", "entropy"])
            .expect("valid key"),
        TypeTopicKey::new(QuestionType::Conceptual, ["genetics", "inheritance"])
            .expect("valid key"),
    ]
}

fn analysis(qt: &str, topics: &[&str], et: &str, cause: &str, mistake: &str) -> String {
    serde_json::json!({
        "question_type": qt,
        "topics": topics,
        "error_type": et,
        "root_cause": cause,
        "specific_mistake": mistake,
        "requires_knowledge": [format!("{} fundamentals", topics[0])],
        "difficulty_factors": ["multi-step setup"],
    })
    .to_string()
}

fn enhancement(
    warnings: &[&str],
    mistakes: &[&str],
    checks: &[&str],
    approach: &str,
    addition: &str,
) -> String {
    serde_json::json!({
        "key_warnings": warnings,
        "common_mistakes": mistakes,
        "verification_steps": checks,
        "type_specific_approach": approach,
        "enhanced_prompt_addition": addition,
    })
    .to_string()
}

const ANALYZE: &str = "Analyze this failed question";
const SYNTHESIZE: &str = "Provide JSON enhancement";

fn answer(letter: &str, reasoning: &str) -> String {
    format!("<reasoning>{reasoning}</reasoning>\n<answer>{letter}</answer>")
}

/// Mock script covering every call the planted pipeline makes.
pub fn planted_script() -> MockScript {
    let analyzer = [
        (
            "Q-ENT-SWAP",
            analysis(
                "calculation",
                &["entropy", "thermodynamics"],
                "calculation_error",
                "Sign of the heat term was flipped",
                "Used +Q/T for heat leaving the system",
            ),
        ),
        (
            "Q-ENT",
            analysis(
                "calculation",
                &["thermodynamics", "entropy"],
                "calculation_error",
                "Sign of the heat term was flipped",
                "Treated an irreversible step as reversible",
            ),
        ),
        (
            "Q-GEN",
            analysis(
                "conceptual",
                &["genetics", "inheritance"],
                "conceptual_misunderstanding",
                "Confused genotype and phenotype ratios",
                "Reported 3:1 where 1:2:1 was asked",
            ),
        ),
        (
            "Q-NOISE-OPTICS",
            analysis(
                "factual",
                &["optics"],
                "knowledge_gap",
                "Misremembered the lens sign convention",
                "Used a positive focal length for a diverging lens",
            ),
        ),
        (
            "Q-NOISE-ACOUSTICS",
            analysis(
                "calculation",
                &["acoustics"],
                "misreading",
                "Read frequency as period",
                "Inverted the given quantity",
            ),
        ),
        (
            "Q-NOISE-ECOLOGY",
            analysis(
                "analysis",
                &["ecology"],
                "incomplete_analysis",
                "Ignored the second trophic level",
                "Stopped after the first transfer",
            ),
        ),
        (
            "Q-NOISE-BOTANY",
            analysis(
                "factual",
                &["botany"],
                "knowledge_gap",
                "Swapped xylem and phloem roles",
                "Named the wrong tissue",
            ),
        ),
    ];
    let synthesizer = [
        ("thermodynamics", enhancement(
            &["Fix the sign of heat flow before dividing by temperature", "Irreversible steps need a reversible path", "Temperatures must be absolute"],
            &["Using +Q/T for heat leaving the system", "Skipping the reversible path", "Mixing Celsius and Kelvin"],
            &["Check the sign of every heat term", "Confirm temperatures are in kelvin", "Compare total entropy change with zero"],
            "Write the entropy balance term by term with explicit signs",
            "For entropy questions, fix the sign convention first and compute along a reversible path.",
        )),
        ("inheritance", enhancement(
            &["Distinguish genotype ratios from phenotype ratios", "Identify dominance before counting"],
            &["Reporting 3:1 when the genotype ratio is requested"],
            &["Draw the Punnett square", "Re-read whether genotype or phenotype is asked"],
            "Enumerate gametes, build the square, then count the requested class",
            "For inheritance questions, state which ratio is requested before counting offspring.",
        )),
    ];

    let mut script = MockScript::new(0);
    for (tag, payload) in analyzer {
        script = script.rule(MockRule::contains(&[ANALYZE, tag], [payload]));
    }
    for (topic, payload) in synthesizer {
        script = script.rule(MockRule::contains(&[SYNTHESIZE, topic], [payload]));
    }
    script = script.rule(MockRule::contains(
        &[SYNTHESIZE],
        [enhancement(
            &["Recall the governing definition before applying it"],
            &["Answering from memory without checking the definition"],
            &["Restate the definition in your own words"],
            "Start from definitions",
            "Recall the relevant definition before answering.",
        )],
    ));

    let right = answer(
        "B",
        "Worked through the conditions and verified the result.",
    );
    let wrong = answer("A", "Applied the first formula that came to mind.");
    let evaluator = [
        (vec!["Key Considerations", "(subject: physics)"], &right),
        (vec!["Key Considerations", "(subject: biology)"], &wrong),
        (vec!["Critical Warnings", "(subject: biology)"], &right),
        (vec!["Critical Warnings", "(subject: physics)"], &wrong),
        (vec!["Common Mistakes", "Q-ENT"], &right),
        (vec!["Common Mistakes", "Q-GEN"], &right),
        (vec!["Q-ENT"], &wrong),
        (vec!["Q-GEN"], &wrong),
        (vec!["Q-NOISE"], &wrong),
    ];
    for (needles, reply) in evaluator {
        script = script.rule(MockRule::contains(&needles, [reply.clone()]));
    }
    script.with_default(right)
}

/// Mock-backed configuration for the planted run.
pub fn planted_config() -> Config {
    Config {
        dataset_name: "planted".into(),
        strategy: StrategyConfig::new(StrategyName::ZeroShot),
        ..Config::default()
    }
}
