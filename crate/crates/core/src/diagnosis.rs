//! Per-failure diagnosis: render the analyzer prompt for each failed
//! question, call the analyzer model, and parse its structured analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, Gateway, GatewayError, Role};
use crate::par::map_ordered;
use crate::payload::{extract_json_object, optional_str, required_str, string_list};
use crate::taxonomy::{
    parse_error_type, parse_question_type, ErrorType, FailureAnalysis, FailureRecord, QuestionType,
};

pub const QUESTION_CLIP: usize = 2000;
pub const ANSWER_CLIP: usize = 500;
pub const REASONING_CLIP: usize = 2000;

pub const DIAGNOSIS_TEMPERATURE: f64 = 0.3;
pub const DIAGNOSIS_MAX_TOKENS: u32 = 800;

/// Appended to the prompt when the previous reply could not be parsed.
pub const JSON_ONLY_REMINDER: &str =
    "Return only the JSON object described above, with no other text before or after it.";

/// First `limit` characters of `s`.
pub fn clip(s: &str, limit: usize) -> &str {
    match s.char_indices().nth(limit) {
        Some((end, _)) => &s[..end],
        None => s,
    }
}

/// One analyzer call's input. The record is clipped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerRequest {
    record: FailureRecord,
    strategy_name: String,
}

impl AnalyzerRequest {
    pub fn new(record: &FailureRecord, strategy_name: impl Into<String>) -> Self {
        let record = FailureRecord {
            question_text: clip(&record.question_text, QUESTION_CLIP).to_string(),
            options: record
                .options
                .iter()
                .map(|o| clip(o, ANSWER_CLIP).to_string())
                .collect(),
            gold_answer: clip(&record.gold_answer, ANSWER_CLIP).to_string(),
            predicted_answer: clip(&record.predicted_answer, ANSWER_CLIP).to_string(),
            reasoning_trace: clip(&record.reasoning_trace, REASONING_CLIP).to_string(),
            ..record.clone()
        };
        AnalyzerRequest {
            record,
            strategy_name: strategy_name.into(),
        }
    }

    pub fn record(&self) -> &FailureRecord {
        &self.record
    }

    pub fn strategy_name(&self) -> &str {
        &self.strategy_name
    }
}

pub fn render_analyzer_prompt(req: &AnalyzerRequest) -> String {
    let r = &req.record;
    let mut p = String::new();
    let _ = writeln!(
        p,
        "Analyze this failed question using \"{}\" strategy.",
        req.strategy_name
    );
    let _ = writeln!(p, "Question: {}", r.question_text);
    if !r.options.is_empty() {
        p.push_str("Options:\n");
        for (i, opt) in r.options.iter().enumerate() {
            let _ = writeln!(p, "{}. {}", option_letter(i), opt);
        }
    }
    let _ = writeln!(p, "Correct: {}", r.gold_answer);
    let _ = writeln!(p, "Model Answer: {}", r.predicted_answer);
    let _ = writeln!(p, "Model Reasoning:\n{}", r.reasoning_trace);
    p.push('\n');

    p.push_str("Question types:\n");
    for t in QuestionType::ALL {
        let _ = writeln!(p, "- {}: {}", t, t.description());
    }
    p.push_str("Error types:\n");
    for t in ErrorType::ALL {
        let _ = writeln!(p, "- {}: {}", t, t.description());
    }
    p.push_str(
        "\nAssign exactly one error type. If several apply, choose the one at the earliest \
         point where the reasoning diverged from a correct solution.\n\
         List topics as short lowercase phrases, most specific first.\n\n",
    );

    p.push_str(
        "Provide JSON analysis:\n\
         {\n    \"question_type\": \"<factual/conceptual/calculation/application/analysis/comparison>\",\n    \
         \"topics\": [\"<topic_1>\", \"<topic_2>\"],\n    \
         \"error_type\": \"<conceptual_misunderstanding/calculation_error/misreading/incomplete_analysis/wrong_elimination/knowledge_gap>\",\n    \
         \"root_cause\": \"<fundamental reasoning deficit>\",\n    \
         \"specific_mistake\": \"<exact step where logic diverged>\",\n    \
         \"requires_knowledge\": [\"<knowledge_1>\"],\n    \
         \"difficulty_factors\": [\"<factor_1>\"]\n}\n",
    );
    p
}

pub(crate) fn option_letter(i: usize) -> char {
    (b'A' + (i % 26) as u8) as char
}

/// Parses an analyzer completion into a fully validated analysis.
pub fn parse_analysis_payload(text: &str, question_id: &str) -> Result<FailureAnalysis> {
    let obj = extract_json_object(text)?;

    let question_type = parse_question_type(required_str(&obj, "question_type")?)?;
    let topics = string_list(&obj, "topics")?;
    if !obj.contains_key("topics") {
        return Err(Error::SchemaViolation(
            "missing required field topics".into(),
        ));
    }
    if topics.is_empty() {
        return Err(Error::SchemaViolation("topics is empty".into()));
    }
    if obj.get("error_type").is_some_and(|v| v.is_array()) {
        return Err(Error::SchemaViolation(
            "error_type must be a single category, got a list".into(),
        ));
    }
    let error_type = parse_error_type(required_str(&obj, "error_type")?)?;
    let root_cause = required_str(&obj, "root_cause")?.trim().to_string();
    if root_cause.is_empty() {
        return Err(Error::SchemaViolation("root_cause is empty".into()));
    }
    required_str(&obj, "specific_mistake")?;
    let specific_mistake = optional_str(&obj, "specific_mistake")?;

    Ok(FailureAnalysis {
        question_id: question_id.to_string(),
        question_type,
        topics,
        error_type,
        root_cause,
        specific_mistake,
        requires_knowledge: string_list(&obj, "requires_knowledge")?,
        difficulty_factors: string_list(&obj, "difficulty_factors")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosisOptions {
    /// Re-asks after an unparseable reply before the record is skipped.
    pub max_reasks: u32,
    pub parallelism: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DiagnosisOptions {
    fn default() -> Self {
        DiagnosisOptions {
            max_reasks: 2,
            parallelism: 1,
            temperature: DIAGNOSIS_TEMPERATURE,
            max_tokens: DIAGNOSIS_MAX_TOKENS,
        }
    }
}

/// A record that produced no analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosisOutcome {
    pub analyses: Vec<FailureAnalysis>,
    pub skipped: Vec<SkipEntry>,
}

/// Builds the request for attempt `attempt` (0 = first ask).
pub fn analyzer_chat_request(prompt: &str, attempt: u32, opts: &DiagnosisOptions) -> ChatRequest {
    let text = if attempt == 0 {
        prompt.to_string()
    } else {
        format!("{prompt}\n{JSON_ONLY_REMINDER}")
    };
    ChatRequest::user(text, opts.temperature, opts.max_tokens).with_sample(attempt)
}

fn diagnose_one(
    record: &FailureRecord,
    strategy_name: &str,
    analyzer: &Gateway,
    opts: &DiagnosisOptions,
) -> std::result::Result<std::result::Result<FailureAnalysis, SkipEntry>, GatewayError> {
    let prompt = render_analyzer_prompt(&AnalyzerRequest::new(record, strategy_name));
    let mut last_error = String::new();
    for attempt in 0..=opts.max_reasks {
        let reply = analyzer.chat(
            Role::Diagnosis,
            &analyzer_chat_request(&prompt, attempt, opts),
        )?;
        match parse_analysis_payload(&reply.text, &record.question_id) {
            Ok(analysis) => return Ok(Ok(analysis)),
            Err(e) => {
                tracing::debug!(question_id = %record.question_id, attempt, error = %e, "unparseable analysis");
                last_error = e.to_string();
            }
        }
    }
    Ok(Err(SkipEntry {
        question_id: record.question_id.clone(),
        reason: format!(
            "{} attempts failed; last error: {last_error}",
            opts.max_reasks + 1
        ),
    }))
}

/// Diagnoses every record. Output order follows input order; records whose
/// replies never parse are skipped and reported. Provider failures abort.
pub fn diagnose_all(
    records: &[FailureRecord],
    strategy_name: &str,
    analyzer: &Gateway,
    opts: &DiagnosisOptions,
) -> Result<DiagnosisOutcome> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let results = map_ordered(opts.parallelism, records, |r| {
        diagnose_one(r, strategy_name, analyzer, opts)
    });
    let mut outcome = DiagnosisOutcome::default();
    for result in results {
        match result? {
            Ok(a) => outcome.analyses.push(a),
            Err(skip) => {
                tracing::warn!(question_id = %skip.question_id, "diagnosis skipped");
                outcome.skipped.push(skip);
            }
        }
    }
    if outcome.analyses.is_empty() {
        return Err(Error::AllDiagnosesFailed(records.len()));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CostLedger, MockBackend, MockRule, MockScript, ModelHandle};
    use std::sync::Arc;

    fn record(id: &str, question: &str) -> FailureRecord {
        FailureRecord {
            question_id: id.into(),
            question_text: question.into(),
            options: vec!["1 J".into(), "2 J".into()],
            gold_answer: "B".into(),
            predicted_answer: "A".into(),
            reasoning_trace: "I added the wrong terms.".into(),
            category: "physics".into(),
        }
    }

    fn payload(qt: &str, topics: &str, et: &str) -> String {
        format!(
            r#"{{"question_type":"{qt}","topics":{topics},"error_type":"{et}","root_cause":"rc","specific_mistake":"sm","requires_knowledge":["k"],"difficulty_factors":["f"]}}"#
        )
    }

    fn gateway(script: MockScript) -> (Gateway, Arc<MockBackend>) {
        let backend = Arc::new(MockBackend::new(script));
        (
            Gateway::new(
                ModelHandle::mock("analyzer"),
                backend.clone(),
                Arc::new(CostLedger::new()),
            ),
            backend,
        )
    }

    #[test]
    fn clips_question_to_2000_chars() {
        let long: String = (0..3000)
            .map(|i| char::from(b'a' + (i % 26) as u8))
            .collect();
        let prompt =
            render_analyzer_prompt(&AnalyzerRequest::new(&record("q", &long), "zero_shot"));
        assert!(prompt.contains(&format!("Question: {}\n", &long[..2000])));
        assert!(!prompt.contains(&long[..2001]));
    }

    #[test]
    fn clip_counts_chars_not_bytes() {
        assert_eq!(clip("ééé", 2), "éé");
        assert_eq!(clip("ab", 5), "ab");
    }

    #[test]
    fn empty_reasoning_renders_empty_section() {
        let mut r = record("q", "What?");
        r.reasoning_trace.clear();
        let prompt = render_analyzer_prompt(&AnalyzerRequest::new(&r, "zero_shot"));
        assert!(prompt.contains("Model Reasoning:\n\n"));
    }

    #[test]
    fn prompt_is_deterministic_and_clip_idempotent() {
        let long = "x".repeat(2500);
        let r = record("q", &long);
        let req = AnalyzerRequest::new(&r, "self_refine");
        let a = render_analyzer_prompt(&req);
        assert_eq!(a, render_analyzer_prompt(&req));
        let again = AnalyzerRequest::new(req.record(), "self_refine");
        assert_eq!(a, render_analyzer_prompt(&again));
        for field in [
            "question_type",
            "topics",
            "error_type",
            "root_cause",
            "specific_mistake",
            "requires_knowledge",
            "difficulty_factors",
        ] {
            assert!(a.contains(&format!("\"{field}\"")), "{field}");
        }
        assert!(a.contains("\"self_refine\" strategy"));
        assert!(a.contains("Correct: B") && a.contains("Model Answer: A"));
    }

    #[test]
    fn parses_direct_payload() {
        let a = parse_analysis_payload(
            &payload(
                "calculation",
                r#"[" thermo ","entropy"]"#,
                "calculation_error",
            ),
            "q7",
        )
        .unwrap();
        assert_eq!(a.question_id, "q7");
        assert_eq!(a.error_type, ErrorType::CalculationError);
        assert_eq!(a.topics, ["thermo", "entropy"]);
        assert_eq!(a.requires_knowledge, ["k"]);
    }

    #[test]
    fn rejects_schema_violations() {
        let missing_root = r#"{"question_type":"factual","topics":["a"],"error_type":"misreading","specific_mistake":"x"}"#;
        assert!(matches!(
            parse_analysis_payload(missing_root, "q"),
            Err(Error::SchemaViolation(_))
        ));
        let multi = payload("factual", r#"["a"]"#, "x").replace(
            r#""error_type":"x""#,
            r#""error_type":["misreading","knowledge_gap"]"#,
        );
        assert!(matches!(
            parse_analysis_payload(&multi, "q"),
            Err(Error::SchemaViolation(_))
        ));
        let no_topics = payload("factual", r#"[" ", ""]"#, "misreading");
        assert!(matches!(
            parse_analysis_payload(&no_topics, "q"),
            Err(Error::SchemaViolation(_))
        ));
        assert!(matches!(
            parse_analysis_payload(&payload("multi-hop", r#"["a"]"#, "misreading"), "q"),
            Err(Error::UnknownQuestionType(_))
        ));
        assert!(matches!(
            parse_analysis_payload(&payload("factual", r#"["a"]"#, "hallucination"), "q"),
            Err(Error::UnknownErrorType(_))
        ));
        assert!(matches!(
            parse_analysis_payload("sorry, no idea", "q"),
            Err(Error::MalformedPayload)
        ));
    }

    #[test]
    fn diagnose_all_happy_path_keeps_order() {
        let script = MockScript::new(0)
            .rule(MockRule::contains(
                &["Question: one"],
                [payload("factual", r#"["a"]"#, "misreading")],
            ))
            .rule(MockRule::contains(
                &["Question: two"],
                [payload("analysis", r#"["b"]"#, "knowledge_gap")],
            ))
            .rule(MockRule::contains(
                &["Question: three"],
                [payload("comparison", r#"["c"]"#, "wrong_elimination")],
            ));
        let (gw, _) = gateway(script);
        let records = [record("1", "one"), record("2", "two"), record("3", "three")];
        let opts = DiagnosisOptions {
            parallelism: 3,
            ..Default::default()
        };
        let out = diagnose_all(&records, "zero_shot", &gw, &opts).unwrap();
        let ids: Vec<_> = out
            .analyses
            .iter()
            .map(|a| a.question_id.as_str())
            .collect();
        assert_eq!(ids, ["1", "2", "3"]);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn malformed_replies_are_retried_then_skipped() {
        let script = MockScript::new(0)
            .rule(MockRule::contains(&["Question: two"], ["not json at all"]))
            .with_default(payload("factual", r#"["a"]"#, "misreading"));
        let (gw, backend) = gateway(script);
        let records = [record("1", "one"), record("2", "two"), record("3", "three")];
        let out = diagnose_all(&records, "zero_shot", &gw, &DiagnosisOptions::default()).unwrap();
        assert_eq!(out.analyses.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].question_id, "2");
        // one call each for the good records, 1 + 2 re-asks for the bad one
        assert_eq!(backend.calls(), 5);
    }

    #[test]
    fn reask_recovers() {
        let script = MockScript::new(0)
            .rule(MockRule::contains(
                &[JSON_ONLY_REMINDER],
                [payload("factual", r#"["a"]"#, "misreading")],
            ))
            .with_default("prose only");
        let (gw, _) = gateway(script);
        let out = diagnose_all(
            &[record("1", "one")],
            "zero_shot",
            &gw,
            &DiagnosisOptions::default(),
        )
        .unwrap();
        assert_eq!(out.analyses.len(), 1);
    }

    #[test]
    fn all_failed_and_empty_input() {
        let (gw, _) = gateway(MockScript::new(0).with_default("nope"));
        assert!(matches!(
            diagnose_all(
                &[record("1", "one")],
                "zero_shot",
                &gw,
                &DiagnosisOptions::default()
            ),
            Err(Error::AllDiagnosesFailed(1))
        ));
        assert!(matches!(
            diagnose_all(&[], "zero_shot", &gw, &DiagnosisOptions::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn provider_failure_aborts() {
        let (gw, _) = gateway(MockScript::new(0));
        assert!(matches!(
            diagnose_all(
                &[record("1", "one")],
                "zero_shot",
                &gw,
                &DiagnosisOptions::default()
            ),
            Err(Error::Gateway(GatewayError::MockExhausted(_)))
        ));
    }

    #[test]
    fn diagnosis_call_settings() {
        let opts = DiagnosisOptions::default();
        assert_eq!(opts.temperature, 0.3);
        assert_eq!(opts.max_tokens, 800);
        let req = analyzer_chat_request("p", 0, &opts);
        assert_eq!(req.temperature, 0.3);
        assert_eq!(req.max_tokens, 800);
    }
}
