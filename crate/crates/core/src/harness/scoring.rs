use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    TokenF1,
}

impl Metric {
    pub fn score(self, extracted: &str, gold: &str, options: &[String]) -> f64 {
        match self {
            Metric::Accuracy => score_accuracy(extracted, gold, options),
            Metric::TokenF1 => score_token_f1(extracted, gold),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::TokenF1 => "f1",
        }
    }
}

fn answer_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)<answer>(.*?)</answer>").expect("valid regex"))
}

fn answer_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^(?:so,?\s+|therefore,?\s+|thus,?\s+)?(?:the\s+)?(?:final\s+)?answer(?:\s+is)?\s*[:=]?\s*")
            .expect("valid regex")
    })
}

fn letter_form() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^(?:option\s+)?\(?([a-z])\)?(?:[.):]|\s|$)").expect("valid regex")
    })
}

/// Parses a number, ignoring thousands separators, a leading `$` and a
/// trailing `%`.
fn parse_number(s: &str) -> Option<f64> {
    let t = s
        .trim()
        .trim_start_matches('$')
        .trim_end_matches('%')
        .replace(',', "");
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn canonical_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Uppercase option letter for `s` when it names one of `options`, either
/// by letter or by the option's text.
fn option_choice(s: &str, options: &[String]) -> Option<String> {
    let t = s.trim();
    if let Some(c) = letter_form().captures(t) {
        let letter = c[1].to_ascii_uppercase();
        let idx = (letter.as_bytes()[0] - b'A') as usize;
        if idx < options.len() {
            return Some(letter);
        }
    }
    options
        .iter()
        .position(|o| o.trim().eq_ignore_ascii_case(t))
        .map(|i| crate::diagnosis::option_letter(i).to_string())
}

/// Final answer from a completion. The last `<answer>` pair wins; without
/// tags the last non-empty line is used with any "the answer is" lead-in
/// removed. Numbers are canonicalized, and option letters uppercased when
/// `options` is non-empty.
pub fn extract_answer(completion: &str, options: &[String]) -> Result<String> {
    let raw = match answer_tag().captures_iter(completion).last() {
        Some(c) => c.get(1).map_or("", |m| m.as_str()).trim().to_string(),
        None => completion
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or("")
            .to_string(),
    };
    let stripped = answer_prefix().replace(&raw, "");
    let answer = stripped.trim().trim_end_matches('.').trim();
    if answer.is_empty() {
        return Err(Error::EmptyCompletion);
    }
    if !options.is_empty() {
        if let Some(letter) = option_choice(answer, options) {
            return Ok(letter);
        }
    }
    Ok(match parse_number(answer) {
        Some(v) => canonical_number(v),
        None => answer.to_string(),
    })
}

fn squash(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// 1.0 on a normalized exact match, else 0.0. Comparison is case and
/// whitespace insensitive, by option letter when options exist, and
/// numeric when both sides parse as numbers.
pub fn score_accuracy(extracted: &str, gold: &str, options: &[String]) -> f64 {
    if !options.is_empty() {
        if let (Some(a), Some(b)) = (
            option_choice(extracted, options),
            option_choice(gold, options),
        ) {
            return f64::from(u8::from(a == b));
        }
    }
    if let (Some(a), Some(b)) = (parse_number(extracted), parse_number(gold)) {
        let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
        return f64::from(u8::from((a - b).abs() <= tol));
    }
    let (a, b) = (squash(extracted), squash(gold));
    f64::from(u8::from(!a.is_empty() && a == b))
}

fn f1_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

/// Multiset token F1 after lowercasing, punctuation removal and article
/// removal. Two empty sides score 1; one empty side scores 0.
pub fn score_token_f1(pred: &str, gold: &str) -> f64 {
    let (p, g) = (f1_tokens(pred), f1_tokens(gold));
    if p.is_empty() || g.is_empty() {
        return f64::from(u8::from(p.is_empty() && g.is_empty()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Most frequent answer after trimming and lowercasing; ties go to the
/// answer seen first. Returns the first-seen spelling of the winner.
pub fn majority_vote<S: AsRef<str>>(answers: &[S]) -> Result<String> {
    let mut tally: Vec<(String, &str, usize)> = Vec::new();
    for a in answers {
        let raw = a.as_ref().trim();
        let key = raw.to_lowercase();
        match tally.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.2 += 1,
            None => tally.push((key, raw, 1)),
        }
    }
    let mut best: Option<&(String, &str, usize)> = None;
    for entry in &tally {
        if best.is_none_or(|b| entry.2 > b.2) {
            best = Some(entry);
        }
    }
    best.map(|b| b.1.to_string()).ok_or(Error::EmptyInput)
}

/// Mean of `scores`, or 0 when empty.
pub fn mean_score(scores: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = scores
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("option {i}")).collect()
    }

    #[test]
    fn extraction() {
        assert_eq!(
            extract_answer("<reasoning>...</reasoning><answer>C</answer>", &opts(4)).unwrap(),
            "C"
        );
        assert_eq!(
            extract_answer("<answer>A</answer> wait <answer> d </answer>", &opts(4)).unwrap(),
            "D"
        );
        assert_eq!(extract_answer("work\nThe answer is 42", &[]).unwrap(), "42");
        assert_eq!(
            extract_answer("<answer>1,200.0</answer>", &[]).unwrap(),
            "1200"
        );
        assert_eq!(
            extract_answer("<answer>(b)</answer>", &opts(3)).unwrap(),
            "B"
        );
        assert_eq!(
            extract_answer("<answer>option 2</answer>", &opts(3)).unwrap(),
            "C"
        );
        assert_eq!(
            extract_answer("<answer>Paris</answer>", &[]).unwrap(),
            "Paris"
        );
        assert!(matches!(
            extract_answer("  \n ", &[]),
            Err(Error::EmptyCompletion)
        ));
        assert!(matches!(
            extract_answer("<answer> </answer>", &[]),
            Err(Error::EmptyCompletion)
        ));
    }

    #[test]
    fn accuracy() {
        assert_eq!(score_accuracy("c", "C", &[]), 1.0);
        assert_eq!(score_accuracy("B", "C", &opts(4)), 0.0);
        assert_eq!(score_accuracy("42.0", "42", &[]), 1.0);
        assert_eq!(score_accuracy("new  York", "New York", &[]), 1.0);
        assert_eq!(score_accuracy("option 1", "B", &opts(4)), 1.0);
        assert_eq!(score_accuracy("", "", &[]), 0.0);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(score_token_f1("the cat sat", "cat sat"), 1.0);
        assert_eq!(score_token_f1("x y", "y z"), 0.5);
        assert_eq!(score_token_f1("", "x"), 0.0);
        assert_eq!(score_token_f1("", "the"), 1.0);
        assert_eq!(score_token_f1("x x y", "x"), 0.5);
    }

    #[test]
    fn voting() {
        assert_eq!(majority_vote(&["B", "B", "A", "C", "B"]).unwrap(), "B");
        assert_eq!(majority_vote(&["A", "B"]).unwrap(), "A");
        assert_eq!(majority_vote(&[" a", "A ", "b"]).unwrap(), "a");
        assert!(majority_vote::<&str>(&[]).is_err());
    }
}
