use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{StrategyConfig, StrategyName};
use crate::diagnosis::option_letter;
use crate::taxonomy::BenchmarkItem;

pub const COT_TRIGGER: &str = "Let's think step by step.";

pub const OUTPUT_FORMAT: &str =
    "Write your reasoning inside <reasoning></reasoning> tags, then give only your final answer inside <answer></answer> tags.";

const CHOICE_HINT: &str =
    "For multiple-choice questions the final answer is the option letter alone.";

/// A worked example shown before the question in few-shot prompting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demo {
    pub question: String,
    #[serde(default)]
    pub options: Vec<String>,
    pub reasoning: String,
    pub answer: String,
}

impl Demo {
    pub fn builtin() -> Self {
        Demo {
            question: "A shop sells pencils at 3 for $1. How much do 12 pencils cost?".into(),
            options: vec!["$3".into(), "$4".into(), "$6".into(), "$12".into()],
            reasoning: "12 pencils is 12 / 3 = 4 groups of three. Each group costs $1, so the total is 4 x $1 = $4.".into(),
            answer: "B".into(),
        }
    }
}

fn question_block(out: &mut String, question: &str, options: &[String]) {
    let _ = writeln!(out, "Question: {question}");
    if !options.is_empty() {
        out.push_str("Options:\n");
        for (i, o) in options.iter().enumerate() {
            let _ = writeln!(out, "{}. {o}", option_letter(i));
        }
    }
}

fn format_lines(out: &mut String, item: &BenchmarkItem) {
    out.push_str(OUTPUT_FORMAT);
    out.push('\n');
    if !item.options.is_empty() {
        out.push_str(CHOICE_HINT);
        out.push('\n');
    }
}

fn preamble(out: &mut String, system: &str) {
    let system = system.trim_end();
    if !system.is_empty() {
        out.push_str(system);
        out.push_str("\n\n");
    }
}

/// The single user message sent for `item` under `config`. `system` is the
/// base or enhanced prompt and leads the message. Self-consistency and
/// self-refine open with the chain-of-thought prompt.
pub fn render_strategy_prompt(
    config: &StrategyConfig,
    item: &BenchmarkItem,
    system: &str,
) -> String {
    let mut p = String::new();
    preamble(&mut p, system);
    if config.name == StrategyName::FewShotCot {
        let builtin = [Demo::builtin()];
        let demos: &[Demo] = if config.demos.is_empty() {
            &builtin
        } else {
            &config.demos
        };
        p.push_str("Example:\n");
        for d in demos {
            question_block(&mut p, &d.question, &d.options);
            let _ = writeln!(
                p,
                "<reasoning>{}</reasoning>\n<answer>{}</answer>\n",
                d.reasoning, d.answer
            );
        }
        p.push_str("Now solve the following problem in the same way.\n\n");
    }
    question_block(&mut p, &item.question, &item.options);
    p.push('\n');
    if config.name != StrategyName::ZeroShot {
        p.push_str(COT_TRIGGER);
        p.push('\n');
    }
    format_lines(&mut p, item);
    p
}

/// Asks the model to review its previous answer.
pub fn render_critique_prompt(item: &BenchmarkItem, system: &str, previous: &str) -> String {
    let mut p = String::new();
    preamble(&mut p, system);
    question_block(&mut p, &item.question, &item.options);
    let _ = writeln!(p, "\nPrevious response:\n{}\n", previous.trim());
    p.push_str(
        "Review the previous response. Check each reasoning step and the final answer for errors, \
         and list any problems you find. If it is correct, say so.\n",
    );
    p
}

/// Asks for a corrected answer given the critique.
pub fn render_revise_prompt(
    item: &BenchmarkItem,
    system: &str,
    previous: &str,
    critique: &str,
) -> String {
    let mut p = String::new();
    preamble(&mut p, system);
    question_block(&mut p, &item.question, &item.options);
    let _ = writeln!(p, "\nPrevious response:\n{}\n", previous.trim());
    let _ = writeln!(p, "Feedback:\n{}\n", critique.trim());
    p.push_str("Using the feedback, write an improved response.\n");
    format_lines(&mut p, item);
    p
}
