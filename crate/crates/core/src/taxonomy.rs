//! Domain types shared by every pipeline phase, plus the two fixed
//! taxonomies (question types and error types).
//!
//! Both enumerations have a canonical lowercase, underscore-separated
//! string form, which is what appears in every file format.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

macro_rules! string_enum_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

/// What kind of question failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuestionType {
    Factual,
    Conceptual,
    Calculation,
    Application,
    Analysis,
    Comparison,
}

impl QuestionType {
    pub const ALL: [QuestionType; 6] = [
        QuestionType::Factual,
        QuestionType::Conceptual,
        QuestionType::Calculation,
        QuestionType::Application,
        QuestionType::Analysis,
        QuestionType::Comparison,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Factual => "factual",
            QuestionType::Conceptual => "conceptual",
            QuestionType::Calculation => "calculation",
            QuestionType::Application => "application",
            QuestionType::Analysis => "analysis",
            QuestionType::Comparison => "comparison",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            QuestionType::Factual => "recall of specific facts or definitions",
            QuestionType::Conceptual => "understanding of principles or theories",
            QuestionType::Calculation => "quantitative problem requiring computation",
            QuestionType::Application => "applying knowledge to novel scenarios",
            QuestionType::Analysis => "breaking down complex information",
            QuestionType::Comparison => "evaluating similarities or differences",
        }
    }
}

/// Case-insensitive, whitespace-trimmed match against the six canonical names.
pub fn parse_question_type(s: &str) -> Result<QuestionType> {
    let wanted = s.trim().to_ascii_lowercase();
    QuestionType::ALL
        .into_iter()
        .find(|t| t.as_str() == wanted)
        .ok_or_else(|| Error::UnknownQuestionType(s.to_string()))
}

impl FromStr for QuestionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_question_type(s)
    }
}

string_enum_serde!(QuestionType);

/// Why a question failed. Exactly one per diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorType {
    ConceptualMisunderstanding,
    CalculationError,
    Misreading,
    IncompleteAnalysis,
    WrongElimination,
    KnowledgeGap,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::ConceptualMisunderstanding,
        ErrorType::CalculationError,
        ErrorType::Misreading,
        ErrorType::IncompleteAnalysis,
        ErrorType::WrongElimination,
        ErrorType::KnowledgeGap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::ConceptualMisunderstanding => "conceptual_misunderstanding",
            ErrorType::CalculationError => "calculation_error",
            ErrorType::Misreading => "misreading",
            ErrorType::IncompleteAnalysis => "incomplete_analysis",
            ErrorType::WrongElimination => "wrong_elimination",
            ErrorType::KnowledgeGap => "knowledge_gap",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ErrorType::ConceptualMisunderstanding => {
                "fundamental confusion about domain principles"
            }
            ErrorType::CalculationError => "computational or mathematical mistakes",
            ErrorType::Misreading => "misinterpretation of the question or choices",
            ErrorType::IncompleteAnalysis => "premature termination of reasoning",
            ErrorType::WrongElimination => "incorrect rejection of candidate answers",
            ErrorType::KnowledgeGap => "absence of requisite domain knowledge",
        }
    }
}

/// Case-insensitive; any of space, hyphen or underscore separates words.
pub fn parse_error_type(s: &str) -> Result<ErrorType> {
    let wanted: String = s
        .trim()
        .split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_")
        .to_ascii_lowercase();
    ErrorType::ALL
        .into_iter()
        .find(|t| t.as_str() == wanted)
        .ok_or_else(|| Error::UnknownErrorType(s.to_string()))
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_error_type(s)
    }
}

string_enum_serde!(ErrorType);

/// One benchmark question as it appears in a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    pub answer: String,
    #[serde(default)]
    pub category: String,
}

/// A benchmark item the model got wrong, with what it answered and why.
///
/// Serialized with the dataset-file key names so a failed-question file is
/// a dataset file with `predicted` and `reasoning` added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    #[serde(rename = "id")]
    pub question_id: String,
    #[serde(rename = "question")]
    pub question_text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    #[serde(rename = "predicted", default)]
    pub predicted_answer: String,
    #[serde(rename = "reasoning", default)]
    pub reasoning_trace: String,
    #[serde(default)]
    pub category: String,
}

impl FailureRecord {
    pub fn from_item(item: &BenchmarkItem, predicted: &str, reasoning: &str) -> Self {
        FailureRecord {
            question_id: item.id.clone(),
            question_text: item.question.clone(),
            options: item.options.clone(),
            gold_answer: item.answer.clone(),
            predicted_answer: predicted.to_string(),
            reasoning_trace: reasoning.to_string(),
            category: item.category.clone(),
        }
    }
}

/// Structured diagnosis of one failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureAnalysis {
    pub question_id: String,
    pub question_type: QuestionType,
    pub topics: Vec<String>,
    pub error_type: ErrorType,
    pub root_cause: String,
    pub specific_mistake: String,
    #[serde(default)]
    pub requires_knowledge: Vec<String>,
    #[serde(default)]
    pub difficulty_factors: Vec<String>,
}

/// Grouping key: question type plus the set of (at most) the first two topics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeTopicKey {
    question_type: QuestionType,
    topics: BTreeSet<String>,
}

impl TypeTopicKey {
    pub fn new<I, S>(question_type: QuestionType, topics: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let topics: BTreeSet<String> = topics.into_iter().map(Into::into).collect();
        if topics.is_empty() || topics.len() > 2 || topics.iter().any(|t| t.is_empty()) {
            return Err(Error::SchemaViolation(format!(
                "type-topic key needs one or two non-empty topics, got {topics:?}"
            )));
        }
        Ok(TypeTopicKey {
            question_type,
            topics,
        })
    }

    pub fn question_type(&self) -> QuestionType {
        self.question_type
    }

    /// Topics in lexicographic order.
    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(String::as_str)
    }

    pub fn topics_joined(&self, sep: &str) -> String {
        self.topics().collect::<Vec<_>>().join(sep)
    }
}

/// `calculation (entropy/thermodynamics)`; also the tie-break sort key.
impl fmt::Display for TypeTopicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.question_type, self.topics_joined("/"))
    }
}

impl<'de> Deserialize<'de> for TypeTopicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            question_type: QuestionType,
            topics: Vec<String>,
        }
        let raw = Raw::deserialize(d)?;
        TypeTopicKey::new(raw.question_type, raw.topics).map_err(serde::de::Error::custom)
    }
}

/// Key of an analysis: its type and the set of its first two topics.
pub fn make_key(a: &FailureAnalysis) -> Result<TypeTopicKey> {
    if a.topics.is_empty() {
        return Err(Error::EmptyTopics(a.question_id.clone()));
    }
    TypeTopicKey::new(a.question_type, a.topics.iter().take(2).cloned())
}

/// A cluster of analyses sharing one key, with its aggregated error profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeTopicGroup {
    pub(crate) key: TypeTopicKey,
    pub(crate) analyses: Vec<FailureAnalysis>,
    pub(crate) error_types: BTreeSet<ErrorType>,
    pub(crate) root_causes: BTreeSet<String>,
    pub(crate) required_knowledge: BTreeSet<String>,
    pub(crate) difficulty_factors: BTreeSet<String>,
}

impl TypeTopicGroup {
    pub fn key(&self) -> &TypeTopicKey {
        &self.key
    }

    pub fn analyses(&self) -> &[FailureAnalysis] {
        &self.analyses
    }

    pub fn len(&self) -> usize {
        self.analyses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analyses.is_empty()
    }

    pub fn error_types(&self) -> &BTreeSet<ErrorType> {
        &self.error_types
    }

    pub fn root_causes(&self) -> &BTreeSet<String> {
        &self.root_causes
    }

    pub fn required_knowledge(&self) -> &BTreeSet<String> {
        &self.required_knowledge
    }

    pub fn difficulty_factors(&self) -> &BTreeSet<String> {
        &self.difficulty_factors
    }

    /// Distinct specific mistakes of the members, in member order.
    pub fn specific_mistakes(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.analyses
            .iter()
            .map(|a| a.specific_mistake.trim())
            .filter(|m| !m.is_empty() && seen.insert(*m))
            .collect()
    }
}

/// Remediation payload synthesized for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub key: TypeTopicKey,
    pub num_questions: usize,
    #[serde(default)]
    pub key_warnings: Vec<String>,
    #[serde(default)]
    pub common_mistakes: Vec<String>,
    #[serde(default)]
    pub verification_steps: Vec<String>,
    #[serde(default)]
    pub type_specific_approach: String,
    #[serde(default)]
    pub enhanced_prompt_addition: String,
}

/// The three rendered enhancement formats. `Specific` is the combination
/// of concise and reasoning content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantKind {
    Concise,
    Reasoning,
    Specific,
}

impl VariantKind {
    /// Also the evaluation precedence used for hybrid tie-breaking.
    pub const ALL: [VariantKind; 3] = [
        VariantKind::Concise,
        VariantKind::Reasoning,
        VariantKind::Specific,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Concise => "concise",
            VariantKind::Reasoning => "reasoning",
            VariantKind::Specific => "specific",
        }
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "concise" | "c" => Ok(VariantKind::Concise),
            "reasoning" | "r" => Ok(VariantKind::Reasoning),
            "specific" | "s" | "c+r" | "r+c" => Ok(VariantKind::Specific),
            _ => Err(Error::InvalidConfig(format!(
                "unknown enhancement variant {s:?}"
            ))),
        }
    }
}

string_enum_serde!(VariantKind);

/// A base prompt with one rendered enhancement suffix appended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhancedPrompt {
    base_prompt: String,
    variant: VariantKind,
    suffix: String,
    full_text: String,
}

impl EnhancedPrompt {
    /// Joins `base` and `suffix` so exactly one blank line separates them.
    pub fn new(
        base_prompt: impl Into<String>,
        variant: VariantKind,
        suffix: impl Into<String>,
    ) -> Self {
        let base_prompt = base_prompt.into();
        let suffix = suffix.into();
        let trailing = base_prompt.len() - base_prompt.trim_end_matches('\n').len();
        let sep = "\n\n".get(trailing.min(2)..).unwrap_or("");
        let full_text = format!("{base_prompt}{sep}{suffix}");
        EnhancedPrompt {
            base_prompt,
            variant,
            suffix,
            full_text,
        }
    }

    /// Rebuilds a prompt from a persisted full text, given the base it was
    /// rendered from.
    pub fn from_full_text(
        base_prompt: &str,
        variant: VariantKind,
        full_text: &str,
    ) -> Result<Self> {
        let rest = full_text.strip_prefix(base_prompt).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{variant} prompt does not start with the base prompt"
            ))
        })?;
        let suffix = rest.trim_start_matches('\n');
        let prompt = EnhancedPrompt::new(base_prompt, variant, suffix);
        if prompt.full_text != full_text {
            return Err(Error::InvalidConfig(format!(
                "{variant} prompt separator does not match the rendered layout"
            )));
        }
        Ok(prompt)
    }

    pub fn base_prompt(&self) -> &str {
        &self.base_prompt
    }

    pub fn variant(&self) -> VariantKind {
        self.variant
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    pub fn full_text(&self) -> &str {
        &self.full_text
    }
}

/// Which arm of an experiment a run record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Baseline,
    Concise,
    Reasoning,
    Specific,
    Hybrid,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Concise => "concise",
            Arm::Reasoning => "reasoning",
            Arm::Specific => "specific",
            Arm::Hybrid => "hybrid",
        }
    }
}

impl From<VariantKind> for Arm {
    fn from(v: VariantKind) -> Self {
        match v {
            VariantKind::Concise => Arm::Concise,
            VariantKind::Reasoning => Arm::Reasoning,
            VariantKind::Specific => Arm::Specific,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of evaluating one item under one strategy and prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default)]
    pub dataset: String,
    pub strategy: String,
    pub arm: Arm,
    pub variant: Option<VariantKind>,
    pub question_id: String,
    #[serde(default)]
    pub category: String,
    pub raw_completion: String,
    pub extracted_answer: String,
    pub score: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_usd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
