//! Enhancement generation: ask the synthesizer for a remediation payload
//! per group, then render the three prompt variants with larger groups
//! first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::allocation::priority_key;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GatewayError, Role};
use crate::par::map_ordered;
use crate::payload::{extract_json_object, required_str, string_list};
use crate::taxonomy::{EnhancedPrompt, Enhancement, TypeTopicGroup, VariantKind};

pub const CONCISE_GROUPS: usize = 8;
pub const REASONING_GROUPS: usize = 6;
pub const SPECIFIC_GROUPS: usize = 10;
pub const MAX_WARNINGS: usize = 3;
pub const MAX_MISTAKES: usize = 3;
pub const MAX_VERIFICATION_STEPS: usize = 4;

pub const SYNTHESIS_TEMPERATURE: f64 = 0.3;
pub const SYNTHESIS_MAX_TOKENS: u32 = 1000;

pub fn render_synthesizer_prompt(group: &TypeTopicGroup) -> String {
    let key = group.key();
    let mut p = String::new();
    let _ = writeln!(
        p,
        "Analyze this group of {} failures on {} questions about: {}.",
        group.len(),
        key.question_type(),
        key.topics_joined(", ")
    );
    let _ = writeln!(p, "Group: {} ({} failures)\n", key, group.len());

    let list = |p: &mut String, title: &str, items: &mut dyn Iterator<Item = &str>| {
        let _ = writeln!(p, "{title}:");
        for item in items {
            let _ = writeln!(p, "- {item}");
        }
    };
    list(
        &mut p,
        "Error types",
        &mut group.error_types().iter().map(|e| e.as_str()),
    );
    list(
        &mut p,
        "Root causes",
        &mut group.root_causes().iter().map(String::as_str),
    );
    list(
        &mut p,
        "Specific mistakes",
        &mut group.specific_mistakes().into_iter(),
    );
    list(
        &mut p,
        "Required knowledge",
        &mut group.required_knowledge().iter().map(String::as_str),
    );
    list(
        &mut p,
        "Difficulty factors",
        &mut group.difficulty_factors().iter().map(String::as_str),
    );

    p.push_str(
        "\nIdentify the error patterns these failures share and write guidance that would \
         prevent them on similar questions. Keep each list item to one sentence.\n\n\
         Provide JSON enhancement:\n\
         {\n    \"key_warnings\": [\"<critical warning about a failure pattern>\"],\n    \
         \"common_mistakes\": [\"<explicit mistake pattern to avoid>\"],\n    \
         \"verification_steps\": [\"<concrete check before answering>\"],\n    \
         \"type_specific_approach\": \"<recommended method for this question type and topic>\",\n    \
         \"enhanced_prompt_addition\": \"<one or two sentences of process guidance>\"\n}\n",
    );
    p
}

/// Parses a synthesizer completion for `group`.
pub fn parse_enhancement_payload(text: &str, group: &TypeTopicGroup) -> Result<Enhancement> {
    let obj = extract_json_object(text)?;
    let addition = required_str(&obj, "enhanced_prompt_addition")?
        .trim()
        .to_string();
    if addition.is_empty() {
        return Err(Error::SchemaViolation(
            "enhanced_prompt_addition is empty".into(),
        ));
    }
    let approach = required_str(&obj, "type_specific_approach")?
        .trim()
        .to_string();
    Ok(Enhancement {
        key: group.key().clone(),
        num_questions: group.len(),
        key_warnings: string_list(&obj, "key_warnings")?,
        common_mistakes: string_list(&obj, "common_mistakes")?,
        verification_steps: string_list(&obj, "verification_steps")?,
        type_specific_approach: approach,
        enhanced_prompt_addition: addition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub max_reasks: u32,
    pub parallelism: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            max_reasks: 2,
            parallelism: 1,
            temperature: SYNTHESIS_TEMPERATURE,
            max_tokens: SYNTHESIS_MAX_TOKENS,
        }
    }
}

/// A group that produced no enhancement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSkip {
    pub key: String,
    pub size: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthesisOutcome {
    pub enhancements: Vec<Enhancement>,
    pub skipped: Vec<GroupSkip>,
}

fn synthesize_inner(
    group: &TypeTopicGroup,
    synthesizer: &Gateway,
    opts: &SynthesisOptions,
) -> std::result::Result<Result<Enhancement>, GatewayError> {
    let prompt = render_synthesizer_prompt(group);
    let mut last = Error::MalformedPayload;
    for attempt in 0..=opts.max_reasks {
        let request = crate::diagnosis::analyzer_chat_request(
            &prompt,
            attempt,
            &crate::diagnosis::DiagnosisOptions {
                temperature: opts.temperature,
                max_tokens: opts.max_tokens,
                ..Default::default()
            },
        );
        let reply = synthesizer.chat(Role::Synthesis, &request)?;
        match parse_enhancement_payload(&reply.text, group) {
            Ok(e) => return Ok(Ok(e)),
            Err(e) => {
                tracing::debug!(key = %group.key(), attempt, error = %e, "unparseable enhancement");
                last = e;
            }
        }
    }
    Ok(Err(last))
}

/// Synthesizes one group's enhancement, re-asking on unparseable replies.
pub fn synthesize_group(
    group: &TypeTopicGroup,
    synthesizer: &Gateway,
    opts: &SynthesisOptions,
) -> Result<Enhancement> {
    synthesize_inner(group, synthesizer, opts)?
}

/// Synthesizes every group. Groups whose replies never parse are skipped;
/// provider failures abort.
pub fn synthesize_all(
    groups: &[TypeTopicGroup],
    synthesizer: &Gateway,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let results = map_ordered(opts.parallelism, groups, |g| {
        synthesize_inner(g, synthesizer, opts)
    });
    let mut outcome = SynthesisOutcome::default();
    for (group, result) in groups.iter().zip(results) {
        match result? {
            Ok(e) => outcome.enhancements.push(e),
            Err(e) => {
                tracing::warn!(key = %group.key(), error = %e, "synthesis skipped");
                outcome.skipped.push(GroupSkip {
                    key: group.key().to_string(),
                    size: group.len(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(outcome)
}

/// Normalized group-size weights, in input order.
pub fn weights(enhancements: &[Enhancement]) -> Vec<f64> {
    let total: usize = enhancements.iter().map(|e| e.num_questions).sum();
    if total == 0 {
        return vec![0.0; enhancements.len()];
    }
    enhancements
        .iter()
        .map(|e| e.num_questions as f64 / total as f64)
        .collect()
}

/// Enhancements ordered largest group first, ties by key string.
pub fn by_priority(enhancements: &[Enhancement]) -> Vec<&Enhancement> {
    let mut sorted: Vec<&Enhancement> = enhancements.iter().collect();
    sorted.sort_by_cached_key(|e| priority_key(e.num_questions, &e.key));
    sorted
}

fn header(category: &str) -> String {
    let name = if category.trim().is_empty() {
        "ALL QUESTIONS".to_string()
    } else {
        category.trim().to_uppercase()
    };
    format!("## GUIDANCE FOR {name}\n")
}

fn finish(mut text: String) -> String {
    text.truncate(text.trim_end().len());
    text.push('\n');
    text
}

pub fn render_concise_suffix(sorted: &[&Enhancement], category: &str) -> String {
    let mut t = header(category);
    t.push_str("### Critical Warnings by Question Type:\n\n");
    for e in sorted.iter().take(CONCISE_GROUPS) {
        let _ = writeln!(
            t,
            "**{} ({})** ({} failures):",
            e.key.question_type(),
            e.key.topics_joined("/"),
            e.num_questions
        );
        let warnings: Vec<&str> = e
            .key_warnings
            .iter()
            .take(MAX_WARNINGS)
            .map(String::as_str)
            .collect();
        if !warnings.is_empty() {
            let _ = writeln!(t, "[!] {}", warnings.join(" | "));
        }
        if !e.enhanced_prompt_addition.is_empty() {
            let _ = writeln!(t, " -> {}", e.enhanced_prompt_addition);
        }
        t.push('\n');
    }
    finish(t)
}

pub fn render_reasoning_suffix(sorted: &[&Enhancement], category: &str) -> String {
    let mut t = header(category);
    t.push_str("### Key Considerations by Problem Type:\n\n");
    for e in sorted.iter().take(REASONING_GROUPS) {
        let guidance = if e.enhanced_prompt_addition.is_empty() {
            &e.type_specific_approach
        } else {
            &e.enhanced_prompt_addition
        };
        let _ = writeln!(
            t,
            "* {} ({}): {}",
            e.key.question_type(),
            e.key.topics_joined("/"),
            guidance
        );
    }
    finish(t)
}

pub fn render_specific_suffix(sorted: &[&Enhancement], category: &str) -> String {
    let mut t = header(category);
    for e in sorted.iter().take(SPECIFIC_GROUPS) {
        let _ = writeln!(
            t,
            "**{} - {}**",
            e.key.question_type(),
            e.key.topics_joined(" & ")
        );
        if !e.common_mistakes.is_empty() {
            t.push_str("Common Mistakes:\n");
            for m in e.common_mistakes.iter().take(MAX_MISTAKES) {
                let _ = writeln!(t, "  x {m}");
            }
        }
        if !e.verification_steps.is_empty() {
            t.push_str("Verification Steps:\n");
            for s in e.verification_steps.iter().take(MAX_VERIFICATION_STEPS) {
                let _ = writeln!(t, "  + {s}");
            }
        }
        if !e.type_specific_approach.is_empty() {
            let _ = writeln!(t, "Approach: {}", e.type_specific_approach);
        }
        t.push('\n');
    }
    finish(t)
}

/// Renders the requested variants of `base` for one category.
pub fn render_enhanced_prompts(
    base: &str,
    enhancements: &[Enhancement],
    category: &str,
    kinds: &[VariantKind],
) -> Result<BTreeMap<VariantKind, EnhancedPrompt>> {
    if enhancements.is_empty() {
        return Err(Error::NoEnhancements);
    }
    let sorted = by_priority(enhancements);
    Ok(kinds
        .iter()
        .map(|&kind| {
            let suffix = match kind {
                VariantKind::Concise => render_concise_suffix(&sorted, category),
                VariantKind::Reasoning => render_reasoning_suffix(&sorted, category),
                VariantKind::Specific => render_specific_suffix(&sorted, category),
            };
            (kind, EnhancedPrompt::new(base, kind, suffix))
        })
        .collect())
}
