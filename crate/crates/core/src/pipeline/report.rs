//! Summary tables and gain statistics over result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::mean_score;
use crate::stats::{gain_stats, GainStats};
use crate::taxonomy::{Arm, RunRecord};

use super::files::write_text;

pub const SUMMARY_TXT: &str = "summary.txt";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const GAIN_STATS: &str = "gain_stats.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub strategy: String,
    pub arm: Arm,
    pub n: usize,
    pub score: f64,
    /// Percent change over the matching baseline row.
    pub relative_gain: Option<f64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_usd: f64,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub stats: std::result::Result<GainStats, String>,
}

/// Aggregates records by (dataset, strategy, arm). Scores are means of the
/// per-item scores.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut buckets: BTreeMap<(String, String, Arm), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        buckets
            .entry((r.dataset.clone(), r.strategy.clone(), r.arm))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<SummaryRow> = buckets
        .into_iter()
        .map(|((dataset, strategy, arm), rs)| SummaryRow {
            dataset,
            strategy,
            arm,
            n: rs.len(),
            score: mean_score(rs.iter().map(|r| r.score)),
            relative_gain: None,
            prompt_tokens: rs.iter().map(|r| r.prompt_tokens).sum(),
            completion_tokens: rs.iter().map(|r| r.completion_tokens).sum(),
            cost_usd: rs.iter().map(|r| r.cost_usd).sum(),
            errors: rs.iter().filter(|r| r.error.is_some()).count(),
        })
        .collect();
    let baselines: BTreeMap<(String, String), f64> = rows
        .iter()
        .filter(|r| r.arm == Arm::Baseline)
        .map(|r| ((r.dataset.clone(), r.strategy.clone()), r.score))
        .collect();
    for row in &mut rows {
        if row.arm != Arm::Baseline {
            if let Some(&b) = baselines.get(&(row.dataset.clone(), row.strategy.clone())) {
                if b != 0.0 {
                    row.relative_gain = Some(crate::stats::relative_gain(b, row.score));
                }
            }
        }
    }
    rows
}

/// (baseline, enhanced) score pairs in percent, one per non-baseline row
/// that has a baseline.
pub fn gain_pairs(rows: &[SummaryRow]) -> Vec<(f64, f64)> {
    let baselines: BTreeMap<(&str, &str), f64> = rows
        .iter()
        .filter(|r| r.arm == Arm::Baseline)
        .map(|r| ((r.dataset.as_str(), r.strategy.as_str()), r.score))
        .collect();
    rows.iter()
        .filter(|r| r.arm != Arm::Baseline)
        .filter_map(|r| {
            baselines
                .get(&(r.dataset.as_str(), r.strategy.as_str()))
                .map(|&b| (b * 100.0, r.score * 100.0))
        })
        .collect()
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<18} {:<10} {:>6} {:>8} {:>9} {:>11} {:>11} {:>10} {:>6}",
        "dataset",
        "strategy",
        "arm",
        "n",
        "score",
        "gain_%",
        "prompt_tok",
        "compl_tok",
        "cost_usd",
        "errors"
    );
    for r in rows {
        let gain = r
            .relative_gain
            .map(|g| format!("{g:+.2}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<16} {:<18} {:<10} {:>6} {:>8.4} {:>9} {:>11} {:>11} {:>10.6} {:>6}",
            r.dataset,
            r.strategy,
            r.arm.as_str(),
            r.n,
            r.score,
            gain,
            r.prompt_tokens,
            r.completion_tokens,
            r.cost_usd,
            r.errors
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record([
        "dataset",
        "strategy",
        "arm",
        "n",
        "score",
        "relative_gain",
        "prompt_tokens",
        "completion_tokens",
        "cost_usd",
        "errors",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.strategy.clone(),
            r.arm.as_str().to_string(),
            r.n.to_string(),
            format!("{:.6}", r.score),
            r.relative_gain
                .map(|g| format!("{g:.6}"))
                .unwrap_or_default(),
            r.prompt_tokens.to_string(),
            r.completion_tokens.to_string(),
            format!("{:.6}", r.cost_usd),
            r.errors.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Builds the summary and gain statistics and writes them under `out`.
/// Too few pairs for statistics is not an error; the reason is written in
/// place of the statistics.
pub fn report(records: &[RunRecord], out: &Path) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no run records".into()));
    }
    let rows = summarize(records);
    write_text(&out.join(SUMMARY_TXT), &summary_text(&rows))?;
    write_text(&out.join(SUMMARY_CSV), &summary_csv(&rows)?)?;
    let stats = gain_stats(&gain_pairs(&rows)).map_err(|e| e.to_string());
    let text = match &stats {
        Ok(s) => s.to_string(),
        Err(e) => {
            tracing::warn!("gain statistics unavailable: {e}");
            format!("gain statistics unavailable: {e}\n")
        }
    };
    write_text(&out.join(GAIN_STATS), &text)?;
    Ok(Report { rows, stats })
}
