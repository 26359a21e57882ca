//! Per-category variant selection on a validation split.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::map_ordered;
use crate::taxonomy::{BenchmarkItem, EnhancedPrompt, VariantKind};

/// Categories smaller than this get a warning when split.
pub const MIN_ITEMS_PER_CATEGORY: usize = 10;

/// Rendered prompts keyed by category and variant.
pub type PromptMap = BTreeMap<(String, VariantKind), EnhancedPrompt>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_ratio: 0.8,
            val_ratio: 0.1,
            test_ratio: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ratios = [self.train_ratio, self.val_ratio, self.test_ratio];
        if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "split ratios must be positive: {ratios:?}"
            )));
        }
        if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split ratios must sum to 1: {ratios:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub train: Vec<BenchmarkItem>,
    pub val: Vec<BenchmarkItem>,
    pub test: Vec<BenchmarkItem>,
}

/// Item indices bucketed by category, categories sorted.
fn category_indices(items: &[BenchmarkItem]) -> BTreeMap<&str, Vec<usize>> {
    let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_cat.entry(item.category.as_str()).or_default().push(i);
    }
    by_cat
}

/// Stratified split. Each category is shuffled independently (categories in
/// sorted order, one RNG stream) and cut into validation and test slices of
/// `round(n * ratio)` items; training gets the remainder. Every split keeps
/// the input order.
pub fn split_dataset(items: &[BenchmarkItem], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut which = vec![0u8; items.len()];
    for (category, mut idx) in category_indices(items) {
        let n = idx.len();
        if n < MIN_ITEMS_PER_CATEGORY {
            tracing::warn!(
                category,
                n,
                "small category; validation accuracy will be coarse"
            );
        }
        idx.shuffle(&mut rng);
        let n_val = ((n as f64 * spec.val_ratio).round() as usize).min(n);
        let n_test = ((n as f64 * spec.test_ratio).round() as usize).min(n - n_val);
        for &i in &idx[..n_val] {
            which[i] = 1;
        }
        for &i in &idx[n_val..n_val + n_test] {
            which[i] = 2;
        }
    }
    let mut splits = Splits::default();
    for (item, w) in items.iter().zip(which) {
        match w {
            0 => splits.train.push(item.clone()),
            1 => splits.val.push(item.clone()),
            _ => splits.test.push(item.clone()),
        }
    }
    Ok(splits)
}

/// Items grouped by category, categories sorted, input order within each.
pub fn by_category(items: &[BenchmarkItem]) -> BTreeMap<String, Vec<BenchmarkItem>> {
    let mut map: BTreeMap<String, Vec<BenchmarkItem>> = BTreeMap::new();
    for item in items {
        map.entry(item.category.clone())
            .or_default()
            .push(item.clone());
    }
    map
}

/// Scores a prompt over a set of items, returning mean score in [0, 1].
pub trait VariantEvaluator: Sync {
    fn evaluate(&self, prompt: &EnhancedPrompt, items: &[BenchmarkItem]) -> Result<f64>;
}

impl<F> VariantEvaluator for F
where
    F: Fn(&EnhancedPrompt, &[BenchmarkItem]) -> Result<f64> + Sync,
{
    fn evaluate(&self, prompt: &EnhancedPrompt, items: &[BenchmarkItem]) -> Result<f64> {
        self(prompt, items)
    }
}

/// Argmax over an accuracy table. Variants are visited in precedence order
/// and a later one replaces the incumbent only when strictly better, so ties
/// keep the earlier variant. The incumbent starts as the first variant
/// present in the table.
pub fn select_from_table(scores: &BTreeMap<VariantKind, f64>) -> Option<(VariantKind, f64)> {
    let mut best: Option<(VariantKind, f64)> = None;
    for kind in VariantKind::ALL {
        let Some(&acc) = scores.get(&kind) else {
            continue;
        };
        match best {
            Some((_, b)) if acc <= b => {}
            _ => best = Some((kind, acc)),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub variant: VariantKind,
    /// Validation accuracy of the chosen variant; `None` on fallback.
    pub accuracy: Option<f64>,
    pub n_val: usize,
    pub scores: BTreeMap<VariantKind, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridPolicy {
    pub entries: BTreeMap<String, PolicyEntry>,
    pub default_variant: VariantKind,
}

impl HybridPolicy {
    pub fn new(default_variant: VariantKind) -> Self {
        HybridPolicy {
            entries: BTreeMap::new(),
            default_variant,
        }
    }

    pub fn variant_for(&self, category: &str) -> VariantKind {
        self.entries
            .get(category)
            .map_or(self.default_variant, |e| e.variant)
    }

    pub fn choices(&self) -> BTreeMap<&str, VariantKind> {
        self.entries
            .iter()
            .map(|(c, e)| (c.as_str(), e.variant))
            .collect()
    }

    /// One line per category, `  {category}: '{variant}' (acc: 72.5%)`.
    pub fn log_lines(&self) -> String {
        let mut s = String::new();
        for (category, e) in &self.entries {
            match e.accuracy {
                Some(a) => {
                    let _ = writeln!(
                        s,
                        "  {category}: '{}' (acc: {:.1}%)",
                        e.variant.as_str(),
                        a * 100.0
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "  {category}: '{}' (default, no validation items)",
                        e.variant.as_str()
                    );
                }
            }
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "# default_variant\t{}\ncategory\tvariant\tval_accuracy\tn_val\n",
            self.default_variant.as_str()
        );
        for (category, e) in &self.entries {
            let acc = e.accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{category}\t{}\t{acc}\t{}", e.variant.as_str(), e.n_val);
        }
        s
    }

    /// Parses [`HybridPolicy::to_tsv`] output. Per-variant score tables are
    /// not persisted and come back empty.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad =
            |line: usize, why: &str| Error::InvalidConfig(format!("policy line {line}: {why}"));
        let mut policy = HybridPolicy::new(VariantKind::Concise);
        for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() || line.starts_with("category\t") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# default_variant\t") {
                policy.default_variant = rest.parse()?;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad(n, "expected 4 tab-separated columns"));
            }
            let accuracy = match cols[2] {
                "" => None,
                a => Some(a.parse::<f64>().map_err(|_| bad(n, "bad accuracy"))?),
            };
            let n_val = cols[3].parse().map_err(|_| bad(n, "bad n_val"))?;
            policy.entries.insert(
                cols[0].to_string(),
                PolicyEntry {
                    variant: cols[1].parse()?,
                    accuracy,
                    n_val,
                    scores: BTreeMap::new(),
                },
            );
        }
        Ok(policy)
    }
}

/// Evaluates every available variant on each category's validation items
/// and keeps the best one. Categories without validation items fall back to
/// `default_variant`.
pub fn select_hybrid(
    val_by_category: &BTreeMap<String, Vec<BenchmarkItem>>,
    prompts: &PromptMap,
    evaluator: &dyn VariantEvaluator,
    default_variant: VariantKind,
    parallelism: usize,
) -> Result<HybridPolicy> {
    let categories: Vec<(&String, &Vec<BenchmarkItem>)> = val_by_category.iter().collect();
    let results = map_ordered(
        parallelism,
        &categories,
        |(category, items)| -> Result<PolicyEntry> {
            let available: Vec<(VariantKind, &EnhancedPrompt)> = VariantKind::ALL
                .iter()
                .filter_map(|&k| prompts.get(&((*category).clone(), k)).map(|p| (k, p)))
                .collect();
            if available.is_empty() {
                return Err(Error::MissingPrompt {
                    category: (*category).clone(),
                    variant: "any".into(),
                });
            }
            if items.is_empty() {
                tracing::warn!(%category, "{}; using {}", Error::NoValidationItems((*category).clone()), default_variant);
                return Ok(PolicyEntry {
                    variant: default_variant,
                    accuracy: None,
                    n_val: 0,
                    scores: BTreeMap::new(),
                });
            }
            let mut scores = BTreeMap::new();
            for (kind, prompt) in available {
                scores.insert(kind, evaluator.evaluate(prompt, items)?);
            }
            let (variant, acc) = select_from_table(&scores).expect("non-empty score table");
            Ok(PolicyEntry {
                variant,
                accuracy: Some(acc),
                n_val: items.len(),
                scores,
            })
        },
    );
    let mut policy = HybridPolicy::new(default_variant);
    for ((category, _), entry) in categories.into_iter().zip(results) {
        policy.entries.insert(category.clone(), entry?);
    }
    Ok(policy)
}

/// The prompt each item receives under `policy`.
pub fn apply_policy<'p>(
    policy: &HybridPolicy,
    items: &[BenchmarkItem],
    prompts: &'p PromptMap,
) -> Result<Vec<&'p EnhancedPrompt>> {
    items
        .iter()
        .map(|item| {
            let variant = policy.variant_for(&item.category);
            prompts
                .get(&(item.category.clone(), variant))
                .ok_or_else(|| Error::MissingPrompt {
                    category: item.category.clone(),
                    variant: variant.as_str().into(),
                })
        })
        .collect()
}
