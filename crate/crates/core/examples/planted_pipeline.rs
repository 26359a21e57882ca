//! The whole pipeline on the built-in planted dataset with a scripted
//! model: baseline, enhance, hybrid and report. Writes into a temp dir.

use std::collections::BTreeSet;
use std::sync::Arc;

use mars::fixtures::{planted_config, planted_dataset, planted_script};
use mars::gateway::MockBackend;
use mars::pipeline::{self, Runtime};

fn main() -> mars::Result<()> {
    let out = std::env::temp_dir().join(format!("mars-planted-{}", std::process::id()));
    let rt = Runtime::with_backend(planted_config(), Arc::new(MockBackend::new(planted_script())), 7, 4)?;
    let items = planted_dataset();

    let base = pipeline::run_baseline(&rt, &items, true, &out.join("baseline"))?;
    println!("baseline: {} train items, {} failed", base.items.len(), base.failed.len());

    let enhanced = pipeline::enhance(&rt, &base.failed, &BTreeSet::new(), &base.items, 2, &out.join("enhance"))?;
    println!("{} cycle(s)", enhanced.cycles_run);
    for e in &enhanced.enhancements {
        println!("  {} x{}", e.key, e.num_questions);
    }

    let hybrid = pipeline::hybrid(&rt, &items, &enhanced.prompts, &out.join("hybrid"))?;
    print!("{}", pipeline::hybrid_report(&hybrid.policy, &hybrid.scores));

    let records: Vec<_> = hybrid.records.values().flatten().cloned().collect();
    let report = pipeline::report(&records, &out.join("report"))?;
    print!("{}", pipeline::report::summary_text(&report.rows));
    println!("outputs in {}", out.display());
    Ok(())
}
