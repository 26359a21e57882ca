//! Split a dataset, score each variant per category on validation, and
//! build the hybrid policy. Scores come from a lookup table here instead
//! of a model.

use std::collections::BTreeMap;

use mars::hybrid::{apply_policy, by_category, select_hybrid, split_dataset, PromptMap, SplitSpec};
use mars::taxonomy::{BenchmarkItem, EnhancedPrompt, VariantKind};

fn main() -> mars::Result<()> {
    let items: Vec<BenchmarkItem> = ["law", "math", "biology"]
        .iter()
        .flat_map(|c| {
            (0..20).map(move |i| BenchmarkItem {
                id: format!("{c}-{i}"),
                question: format!("{c} question {i}"),
                options: vec![],
                answer: "x".into(),
                category: c.to_string(),
            })
        })
        .collect();
    let splits = split_dataset(&items, &SplitSpec::with_seed(42))?;
    println!("train {} / val {} / test {}", splits.train.len(), splits.val.len(), splits.test.len());

    let mut prompts = PromptMap::new();
    for c in ["law", "math", "biology"] {
        for kind in VariantKind::ALL {
            prompts.insert((c.into(), kind), EnhancedPrompt::new("base", kind, format!("{c} {kind} guidance")));
        }
    }
    let table: BTreeMap<(&str, VariantKind), f64> = BTreeMap::from([
        (("law", VariantKind::Concise), 0.50),
        (("law", VariantKind::Reasoning), 0.75),
        (("law", VariantKind::Specific), 0.75),
        (("math", VariantKind::Concise), 0.25),
        (("math", VariantKind::Reasoning), 0.50),
        (("math", VariantKind::Specific), 1.00),
        (("biology", VariantKind::Concise), 0.50),
        (("biology", VariantKind::Reasoning), 0.50),
        (("biology", VariantKind::Specific), 0.50),
    ]);
    let evaluator =
        |p: &EnhancedPrompt, val: &[BenchmarkItem]| Ok(table[&(val[0].category.as_str(), p.variant())]);
    let policy = select_hybrid(&by_category(&splits.val), &prompts, &evaluator, VariantKind::Concise, 2)?;
    print!("{}", policy.log_lines());
    print!("{}", policy.to_tsv());

    let assigned = apply_policy(&policy, &splits.test, &prompts)?;
    for (item, p) in splits.test.iter().zip(assigned).take(4) {
        println!("{} -> {}", item.id, p.variant());
    }
    Ok(())
}
