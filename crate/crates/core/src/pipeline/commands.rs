//! One function per pipeline step. Each reads in-memory inputs, writes its
//! artifacts under `out`, and returns what it wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::allocation::{group_by_type_topic, GroupLine};
use crate::diagnosis::{diagnose_all, DiagnosisOptions, DiagnosisOutcome};
use crate::error::{Error, Result};
use crate::gateway::estimate_cost;
use crate::harness::{mean_score, run_strategy, ItemPrompt, RunContext};
use crate::hybrid::{
    apply_policy, by_category, select_hybrid, split_dataset, HybridPolicy, PromptMap, Splits,
};
use crate::synthesis::{
    render_enhanced_prompts, synthesize_all, SynthesisOptions, SynthesisOutcome,
};
use crate::taxonomy::{
    Arm, BenchmarkItem, EnhancedPrompt, Enhancement, FailureAnalysis, FailureRecord, RunRecord,
    TypeTopicGroup,
};

use super::files::*;
use super::runtime::Runtime;

pub const COST_REPORT: &str = "cost_report.txt";
pub const HYBRID_REPORT: &str = "hybrid_report.txt";

pub fn results_file(arm: Arm) -> String {
    format!("results_{}.jsonl", arm.as_str())
}

fn write_cost_report(rt: &Runtime, out: &Path) -> Result<()> {
    write_text(
        &out.join(COST_REPORT),
        &estimate_cost(&rt.ledger).to_string(),
    )
}

fn run_context(rt: &Runtime, arm: Arm) -> RunContext {
    RunContext::new(rt.config.dataset_name.clone(), arm)
        .with_metric(rt.config.metric)
        .with_parallelism(rt.parallelism)
}

fn reasoning_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)<reasoning>(.*?)</reasoning>").expect("valid regex"))
}

/// Reasoning text of a completion: the last reasoning tag's body, or the
/// whole completion when untagged.
pub fn reasoning_of(completion: &str) -> String {
    match reasoning_tag().captures_iter(completion).last() {
        Some(c) => c[1].trim().to_string(),
        None => completion.trim().to_string(),
    }
}

/// Failed subset of a run: every record scoring below 1.
pub fn failures(items: &[BenchmarkItem], records: &[RunRecord]) -> Vec<FailureRecord> {
    items
        .iter()
        .zip(records)
        .filter(|(_, r)| r.score < 1.0)
        .map(|(item, r)| {
            FailureRecord::from_item(item, &r.extracted_answer, &reasoning_of(&r.raw_completion))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub items: Vec<BenchmarkItem>,
    pub records: Vec<RunRecord>,
    pub failed: Vec<FailureRecord>,
}

/// Evaluates the base prompt. With `split`, only the training split is run
/// and all three splits are written next to the results.
pub fn run_baseline(
    rt: &Runtime,
    items: &[BenchmarkItem],
    split: bool,
    out: &Path,
) -> Result<BaselineOutput> {
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ensure_dir(out)?;
    let items = if split {
        let Splits { train, val, test } = split_dataset(items, &rt.config.split.spec(rt.seed))?;
        write_jsonl(&out.join("train.jsonl"), &train)?;
        write_jsonl(&out.join("val.jsonl"), &val)?;
        write_jsonl(&out.join("test.jsonl"), &test)?;
        train
    } else {
        items.to_vec()
    };
    let base = rt.config.base_prompt.as_str();
    let records = run_strategy(
        &rt.config.strategy,
        &items,
        &[ItemPrompt::base(base)],
        &rt.evaluator,
        &run_context(rt, Arm::Baseline),
    );
    let failed = failures(&items, &records);
    write_jsonl(&out.join(RESULTS), &records)?;
    write_jsonl(&out.join(FAILED), &failed)?;
    write_cost_report(rt, out)?;
    tracing::info!(items = items.len(), failed = failed.len(), "baseline done");
    Ok(BaselineOutput {
        items,
        records,
        failed,
    })
}

pub fn diagnose(rt: &Runtime, failed: &[FailureRecord], out: &Path) -> Result<DiagnosisOutcome> {
    if failed.is_empty() {
        return Err(Error::NoFailures);
    }
    let opts = DiagnosisOptions {
        max_reasks: rt.config.max_reasks,
        parallelism: rt.parallelism,
        ..Default::default()
    };
    let outcome = diagnose_all(
        failed,
        rt.config.strategy.name.as_str(),
        &rt.analyzer,
        &opts,
    )?;
    write_jsonl(&out.join(ANALYSES), &outcome.analyses)?;
    write_jsonl(&out.join(SKIPPED_DIAGNOSIS), &outcome.skipped)?;
    write_cost_report(rt, out)?;
    Ok(outcome)
}

pub fn group(analyses: &[FailureAnalysis], out: &Path) -> Result<Vec<TypeTopicGroup>> {
    let groups = group_by_type_topic(analyses)?;
    let lines: Vec<GroupLine> = groups.iter().map(GroupLine::from).collect();
    write_jsonl(&out.join(GROUPS), &lines)?;
    Ok(groups)
}

pub fn read_groups(path: &Path) -> Result<Vec<TypeTopicGroup>> {
    read_jsonl::<GroupLine>(path)?
        .into_iter()
        .map(TypeTopicGroup::try_from)
        .collect()
}

pub fn synthesize(rt: &Runtime, groups: &[TypeTopicGroup], out: &Path) -> Result<SynthesisOutcome> {
    let opts = SynthesisOptions {
        max_reasks: rt.config.max_reasks,
        parallelism: rt.parallelism,
        ..Default::default()
    };
    let outcome = synthesize_all(groups, &rt.synthesizer, &opts)?;
    write_jsonl(&out.join(ENHANCEMENTS), &outcome.enhancements)?;
    write_jsonl(&out.join(SKIPPED_SYNTHESIS), &outcome.skipped)?;
    write_cost_report(rt, out)?;
    Ok(outcome)
}

/// Renders every configured variant for every category and writes the
/// prompt directory. All categories share the same guidance sections.
pub fn render(
    rt: &Runtime,
    enhancements: &[Enhancement],
    categories: &BTreeSet<String>,
    out: &Path,
) -> Result<PromptMap> {
    let base = rt.config.base_prompt.as_str();
    let mut prompts = PromptMap::new();
    for category in categories {
        for (kind, prompt) in
            render_enhanced_prompts(base, enhancements, category, &rt.config.variants)?
        {
            prompts.insert((category.clone(), kind), prompt);
        }
    }
    write_prompts(&out.join(PROMPTS_DIR), base, &prompts)?;
    Ok(prompts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceOutput {
    pub analyses: Vec<FailureAnalysis>,
    pub groups: Vec<TypeTopicGroup>,
    pub enhancements: Vec<Enhancement>,
    pub prompts: PromptMap,
    pub cycles_run: u32,
}

/// Adds `new` to `prior`. A key seen before keeps its position and takes
/// the newer guidance; its failure count becomes the sum over cycles.
pub fn merge_enhancements(prior: &[Enhancement], new: Vec<Enhancement>) -> Vec<Enhancement> {
    let mut merged = prior.to_vec();
    for e in new {
        match merged.iter_mut().find(|m| m.key == e.key) {
            Some(m) => {
                let total = m.num_questions + e.num_questions;
                *m = Enhancement {
                    num_questions: total,
                    ..e
                };
            }
            None => merged.push(e),
        }
    }
    merged
}

fn one_cycle(
    rt: &Runtime,
    failed: &[FailureRecord],
    prior: &[Enhancement],
    categories: &BTreeSet<String>,
    out: &Path,
) -> Result<EnhanceOutput> {
    let diagnosis = diagnose(rt, failed, out)?;
    let groups = group(&diagnosis.analyses, out)?;
    let synthesis = synthesize(rt, &groups, out)?;
    let enhancements = merge_enhancements(prior, synthesis.enhancements);
    let prompts = render(rt, &enhancements, categories, out)?;
    Ok(EnhanceOutput {
        analyses: diagnosis.analyses,
        groups,
        enhancements,
        prompts,
        cycles_run: 1,
    })
}

/// Runs every enhancement phase over `failed`. Prompts are produced for every
/// category of the failures plus `extra_categories`.
///
/// With `cycles > 1`, each further cycle evaluates `items` under the
/// specific variant, diagnoses the residual failures, and adds the new
/// enhancements to the earlier ones. Cycle `k >= 2` writes to
/// `out/cycle{k}`; the top-level enhancements and prompts are replaced by
/// the cumulative result.
pub fn enhance(
    rt: &Runtime,
    failed: &[FailureRecord],
    extra_categories: &BTreeSet<String>,
    items: &[BenchmarkItem],
    cycles: u32,
    out: &Path,
) -> Result<EnhanceOutput> {
    ensure_dir(out)?;
    let mut categories: BTreeSet<String> = failed.iter().map(|f| f.category.clone()).collect();
    categories.extend(extra_categories.iter().cloned());
    categories.extend(items.iter().map(|i| i.category.clone()));

    let mut result = one_cycle(rt, failed, &[], &categories, out)?;
    for k in 2..=cycles {
        if items.is_empty() {
            return Err(Error::InvalidConfig(
                "further cycles need the evaluated items".into(),
            ));
        }
        let prompts: Vec<ItemPrompt> = items
            .iter()
            .map(|i| -> Result<ItemPrompt> {
                let p = result
                    .prompts
                    .get(&(i.category.clone(), crate::taxonomy::VariantKind::Specific))
                    .or_else(|| {
                        result
                            .prompts
                            .iter()
                            .find(|((c, _), _)| c == &i.category)
                            .map(|(_, p)| p)
                    })
                    .ok_or_else(|| Error::MissingPrompt {
                        category: i.category.clone(),
                        variant: "specific".into(),
                    })?;
                Ok(ItemPrompt::enhanced(p))
            })
            .collect::<Result<_>>()?;
        let dir = out.join(format!("cycle{k}"));
        ensure_dir(&dir)?;
        let records = run_strategy(
            &rt.config.strategy,
            items,
            &prompts,
            &rt.evaluator,
            &run_context(rt, Arm::Specific),
        );
        write_jsonl(&dir.join(RESULTS), &records)?;
        let residual = failures(items, &records);
        write_jsonl(&dir.join(FAILED), &residual)?;
        if residual.is_empty() {
            tracing::info!(cycle = k, "no residual failures; stopping");
            break;
        }
        let next = one_cycle(rt, &residual, &result.enhancements, &categories, &dir)?;
        result = EnhanceOutput {
            cycles_run: result.cycles_run + 1,
            ..next
        };
    }
    if result.cycles_run > 1 {
        write_jsonl(&out.join(ENHANCEMENTS), &result.enhancements)?;
        write_prompts(
            &out.join(PROMPTS_DIR),
            &rt.config.base_prompt,
            &result.prompts,
        )?;
    }
    write_cost_report(rt, out)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmScore {
    pub arm: Arm,
    pub n: usize,
    pub score: f64,
    /// Percentage points over baseline; `None` for the baseline itself.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutput {
    pub policy: HybridPolicy,
    pub scores: Vec<ArmScore>,
    pub records: BTreeMap<Arm, Vec<RunRecord>>,
}

fn base_of(prompts: &PromptMap, fallback: &str) -> String {
    prompts
        .values()
        .next()
        .map_or_else(|| fallback.to_string(), |p| p.base_prompt().to_string())
}

/// Splits `items`, picks a variant per category on the validation split,
/// and scores baseline, each variant, and the hybrid policy on the test
/// split.
pub fn hybrid(
    rt: &Runtime,
    items: &[BenchmarkItem],
    prompts: &PromptMap,
    out: &Path,
) -> Result<HybridOutput> {
    if prompts.is_empty() {
        return Err(Error::NoEnhancements);
    }
    ensure_dir(out)?;
    let splits = split_dataset(items, &rt.config.split.spec(rt.seed))?;
    let mut val_by_category = by_category(&splits.val);
    for item in items {
        val_by_category.entry(item.category.clone()).or_default();
    }
    let strategy = &rt.config.strategy;
    let evaluator = |prompt: &EnhancedPrompt, val: &[BenchmarkItem]| -> Result<f64> {
        let recs = run_strategy(
            strategy,
            val,
            &[ItemPrompt::enhanced(prompt)],
            &rt.evaluator,
            &run_context(rt, prompt.variant().into()),
        );
        Ok(mean_score(recs.iter().map(|r| r.score)))
    };
    let policy = select_hybrid(
        &val_by_category,
        prompts,
        &evaluator,
        rt.config.default_variant,
        rt.parallelism,
    )?;
    tracing::info!("hybrid selection:\n{}", policy.log_lines());
    write_text(&out.join(POLICY), &policy.to_tsv())?;

    let test = &splits.test;
    let base = base_of(prompts, &rt.config.base_prompt);
    let mut records = BTreeMap::new();
    records.insert(
        Arm::Baseline,
        run_strategy(
            strategy,
            test,
            &[ItemPrompt::base(&base)],
            &rt.evaluator,
            &run_context(rt, Arm::Baseline),
        ),
    );
    for &kind in &rt.config.variants {
        let per_item: Vec<ItemPrompt> = test
            .iter()
            .map(|i| {
                prompts
                    .get(&(i.category.clone(), kind))
                    .map(ItemPrompt::enhanced)
                    .ok_or_else(|| Error::MissingPrompt {
                        category: i.category.clone(),
                        variant: kind.as_str().into(),
                    })
            })
            .collect::<Result<_>>()?;
        records.insert(kind.into(), run_arm(rt, test, &per_item, kind.into()));
    }
    let chosen: Vec<ItemPrompt> = apply_policy(&policy, test, prompts)?
        .into_iter()
        .map(ItemPrompt::enhanced)
        .collect();
    records.insert(Arm::Hybrid, run_arm(rt, test, &chosen, Arm::Hybrid));

    let baseline = mean_score(records[&Arm::Baseline].iter().map(|r| r.score));
    let scores: Vec<ArmScore> = records
        .iter()
        .map(|(&arm, recs)| {
            let score = mean_score(recs.iter().map(|r| r.score));
            let delta = (arm != Arm::Baseline).then_some((score - baseline) * 100.0);
            ArmScore {
                arm,
                n: recs.len(),
                score,
                delta,
            }
        })
        .collect();
    for (arm, recs) in &records {
        write_jsonl(&out.join(results_file(*arm)), recs)?;
    }
    write_text(&out.join(HYBRID_REPORT), &hybrid_report(&policy, &scores))?;
    write_cost_report(rt, out)?;
    Ok(HybridOutput {
        policy,
        scores,
        records,
    })
}

fn run_arm(
    rt: &Runtime,
    items: &[BenchmarkItem],
    prompts: &[ItemPrompt],
    arm: Arm,
) -> Vec<RunRecord> {
    if items.is_empty() {
        return Vec::new();
    }
    run_strategy(
        &rt.config.strategy,
        items,
        prompts,
        &rt.evaluator,
        &run_context(rt, arm),
    )
}

pub fn hybrid_report(policy: &HybridPolicy, scores: &[ArmScore]) -> String {
    let mut s = String::from("policy:\n");
    s.push_str(&policy.log_lines());
    let _ = writeln!(
        s,
        "\n{:<10} {:>6} {:>8} {:>8}",
        "arm", "n", "score", "delta"
    );
    for a in scores {
        let delta = a.delta.map(|d| format!("{d:+.2}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>8.4} {:>8}",
            a.arm.as_str(),
            a.n,
            a.score,
            delta
        );
    }
    s
}
