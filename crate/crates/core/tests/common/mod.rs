#![allow(dead_code)]

use mars::gateway::{CostLedger, LedgerEntry, Role};
use mars::taxonomy::{Enhancement, ErrorType, FailureAnalysis, QuestionType, TypeTopicKey};
use mars::Error;
use rand::seq::SliceRandom;
use rand::Rng;

pub const GROUP_SIZES: [usize; 12] = [9, 7, 7, 6, 5, 4, 4, 3, 2, 2, 1, 1];

const TOPICS: [(&str, &str); 12] = [
    ("thermodynamics", "entropy"),
    ("kinematics", "projectiles"),
    ("genetics", "inheritance"),
    ("optics", "lenses"),
    ("probability", "combinatorics"),
    ("algebra", "inequalities"),
    ("ecology", "food webs"),
    ("circuits", "resistance"),
    ("chemistry", "stoichiometry"),
    ("geometry", "circles"),
    ("statistics", "sampling"),
    ("history", "treaties"),
];

/// Twelve enhancements with sizes [`GROUP_SIZES`], shuffled out of
/// priority order so rendering has to sort them. Some groups leave
/// optional sections empty.
pub fn twelve_group_enhancements() -> Vec<Enhancement> {
    let mut out: Vec<Enhancement> = GROUP_SIZES
        .iter()
        .zip(TOPICS)
        .enumerate()
        .map(|(i, (&n, (t1, t2)))| {
            let qt = QuestionType::ALL[i % QuestionType::ALL.len()];
            let warnings = (1..=4).map(|k| format!("{t1} warning {k}")).collect();
            let mistakes = if i % 5 == 4 {
                vec![]
            } else {
                (1..=4).map(|k| format!("{t2} mistake {k}")).collect()
            };
            let steps = if i % 4 == 3 {
                vec![]
            } else {
                (1..=5).map(|k| format!("check {t1} step {k}")).collect()
            };
            Enhancement {
                key: TypeTopicKey::new(qt, [t1, t2]).unwrap(),
                num_questions: n,
                key_warnings: warnings,
                common_mistakes: mistakes,
                verification_steps: steps,
                type_specific_approach: format!("Work {t1} problems from first principles"),
                enhanced_prompt_addition: if i % 6 == 5 {
                    String::new()
                } else {
                    format!("For {t2}, restate what is asked first.")
                },
            }
        })
        .collect();
    out.reverse();
    out.swap(0, 5);
    out
}

pub fn analysis(id: &str, qt: QuestionType, topics: &[&str]) -> FailureAnalysis {
    FailureAnalysis {
        question_id: id.into(),
        question_type: qt,
        topics: topics.iter().map(|s| s.to_string()).collect(),
        error_type: ErrorType::ConceptualMisunderstanding,
        root_cause: "misapplied a rule".into(),
        specific_mistake: "picked the wrong formula".into(),
        requires_knowledge: vec![],
        difficulty_factors: vec![],
    }
}

/// Random analyses over a small topic alphabet so keys collide often.
pub fn random_analyses(rng: &mut impl Rng, n: usize) -> Vec<FailureAnalysis> {
    const ALPHABET: [&str; 6] = ["t0", "t1", "t2", "t3", "t4", "t5"];
    (0..n)
        .map(|i| {
            let qt = QuestionType::ALL[rng.gen_range(0..QuestionType::ALL.len())];
            let k = rng.gen_range(1..=3);
            let topics: Vec<&str> = ALPHABET.choose_multiple(rng, k).copied().collect();
            let mut a = analysis(&format!("q{i}"), qt, &topics);
            a.error_type = ErrorType::ALL[rng.gen_range(0..ErrorType::ALL.len())];
            a
        })
        .collect()
}

const VALID: &str = r#"{"question_type": "calculation", "topics": ["thermodynamics", "entropy"], "error_type": "calculation_error", "root_cause": "Sign of heat flipped", "specific_mistake": "Used +Q/T", "requires_knowledge": ["second law"], "difficulty_factors": ["multi-step"]}"#;

/// Analyzer replies in the wrappers models actually produce. Every one
/// must parse.
pub fn wrapper_corpus() -> Vec<(&'static str, String)> {
    let pretty =
        serde_json::to_string_pretty(&serde_json::from_str::<serde_json::Value>(VALID).unwrap())
            .unwrap();
    vec![
        ("bare", VALID.to_string()),
        ("json fence", format!("```json\n{VALID}\n```")),
        ("plain fence", format!("```\n{VALID}\n```")),
        ("prose before", format!("Here is my analysis:\n{VALID}")),
        ("prose after", format!("{VALID}\nLet me know if you need more.")),
        ("prose both sides", format!("Sure.\n\n{VALID}\n\nHope this helps!")),
        ("trailing junk", format!("{VALID}}}]]")),
        ("brace noise before", format!("Using {{the template}} as asked: {VALID}")),
        ("pretty", pretty.clone()),
        ("crlf", pretty.replace('\n', "\r\n")),
        ("capitalized enums", VALID.replace("\"calculation\"", "\"Calculation\"").replace("\"calculation_error\"", "\"Calculation_Error\"")),
        ("hyphenated error type", VALID.replace("calculation_error", "calculation-error")),
        ("extra fields", VALID.replacen('{', r#"{"confidence": 0.8, "notes": "none", "#, 1)),
        ("nested extra object", VALID.replacen('{', r#"{"meta": {"model": "x", "depth": {"n": 1}}, "#, 1)),
        ("unicode", VALID.replace("Sign of heat flipped", "Δs sign flipped for Q → T")),
        ("escaped quotes", VALID.replace("Used +Q/T", r#"Wrote \"+Q/T\" for outflow"#)),
        ("two objects", format!("{VALID}\n{}", VALID.replace("calculation", "factual"))),
        ("topics as string", VALID.replace(r#"["thermodynamics", "entropy"]"#, r#""thermodynamics""#)),
        ("tabs and padding", format!("\t\n   {}   \t\n", VALID.replace(", ", ",\t"))),
        (
            "heading with fence, optional fields absent",
            "### Analysis\n```json\n{\"question_type\": \"conceptual\", \"topics\": [\"genetics\"], \"error_type\": \"knowledge_gap\", \"root_cause\": \"x\", \"specific_mistake\": \"y\"}\n```".to_string(),
        ),
    ]
}

/// Replies that must be rejected, each with a predicate on the error.
pub type ErrorCheck = fn(&Error) -> bool;

pub fn malformed_corpus() -> Vec<(&'static str, String, ErrorCheck)> {
    vec![
        ("empty", String::new(), |e| {
            matches!(e, Error::MalformedPayload)
        }),
        (
            "prose only",
            "I could not determine the cause.".into(),
            |e| matches!(e, Error::MalformedPayload),
        ),
        ("truncated", VALID[..VALID.len() / 2].to_string(), |e| {
            matches!(e, Error::MalformedPayload)
        }),
        (
            "array",
            format!("[{}]", VALID.replace('{', "(").replace('}', ")")),
            |e| matches!(e, Error::MalformedPayload),
        ),
        (
            "missing question_type",
            VALID.replace(r#""question_type": "calculation", "#, ""),
            |e| matches!(e, Error::SchemaViolation(_)),
        ),
        (
            "unknown question type",
            VALID.replace("\"calculation\"", "\"opinion\""),
            |e| matches!(e, Error::UnknownQuestionType(_)),
        ),
        (
            "unknown error type",
            VALID.replace("calculation_error", "typo"),
            |e| matches!(e, Error::UnknownErrorType(_)),
        ),
        (
            "empty topics",
            VALID.replace(r#"["thermodynamics", "entropy"]"#, "[]"),
            |e| matches!(e, Error::SchemaViolation(_)),
        ),
        (
            "error type list",
            VALID.replace(
                r#""calculation_error""#,
                r#"["calculation_error", "misreading"]"#,
            ),
            |e| matches!(e, Error::SchemaViolation(_)),
        ),
        (
            "empty root cause",
            VALID.replace("Sign of heat flipped", "  "),
            |e| matches!(e, Error::SchemaViolation(_)),
        ),
    ]
}

/// 200 diagnosis calls at 1000/1000 tokens and 50 synthesis calls at
/// 1500/1500, priced at 0.0005 in and 0.0015 out per 1K tokens.
pub fn synthetic_ledger() -> CostLedger {
    let ledger = CostLedger::new();
    let handle = mars::gateway::ModelHandle::mock("gpt-3.5-turbo").with_prices(0.0005, 0.0015);
    for (role, calls, tokens) in [(Role::Diagnosis, 200, 1000), (Role::Synthesis, 50, 1500)] {
        for _ in 0..calls {
            ledger.record(
                role,
                &handle,
                mars::gateway::Usage {
                    prompt_tokens: tokens,
                    completion_tokens: tokens,
                },
            );
        }
    }
    ledger
}

pub fn ledger_entry(
    role: Role,
    prompt_tokens: u64,
    completion_tokens: u64,
    cost_micros: i64,
) -> LedgerEntry {
    LedgerEntry {
        role,
        model_name: "m".into(),
        prompt_tokens,
        completion_tokens,
        cost_micros,
    }
}
