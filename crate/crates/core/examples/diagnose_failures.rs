//! Diagnose failed questions with a scripted analyzer, including one reply
//! that never parses and ends up in the skip list.

use std::sync::Arc;

use mars::diagnosis::{diagnose_all, parse_analysis_payload, DiagnosisOptions};
use mars::gateway::{CostLedger, Gateway, MockBackend, MockRule, MockScript, ModelHandle};
use mars::taxonomy::{BenchmarkItem, FailureRecord};

fn main() -> mars::Result<()> {
    // models wrap their JSON in all sorts of ways
    let reply = "Sure, here you go:\n```json\n{\"question_type\": \"Calculation\", \"topics\": [\"optics\"], \
                 \"error_type\": \"calculation-error\", \"root_cause\": \"Sign slip\", \"specific_mistake\": \"1/f sign\"}\n```";
    println!("{:#?}", parse_analysis_payload(reply, "demo")?);

    let failed: Vec<FailureRecord> = ["lens", "mirror"]
        .iter()
        .enumerate()
        .map(|(i, topic)| {
            let item = BenchmarkItem {
                id: format!("q{i}"),
                question: format!("Find the image distance for the {topic}."),
                options: vec!["10 cm".into(), "20 cm".into()],
                answer: "B".into(),
                category: "physics".into(),
            };
            FailureRecord::from_item(&item, "A", "Used 1/f = 1/u + 1/v with the wrong sign.")
        })
        .collect();

    let script = MockScript::new(0)
        .rule(MockRule::contains(&["lens"], [reply]))
        .rule(MockRule::contains(&["mirror"], ["I am not sure what went wrong."]));
    let analyzer = Gateway::new(
        ModelHandle::mock("analyzer"),
        Arc::new(MockBackend::new(script)),
        Arc::new(CostLedger::new()),
    );
    let outcome = diagnose_all(&failed, "zero_shot", &analyzer, &DiagnosisOptions::default())?;
    for a in &outcome.analyses {
        println!("{}: {} / {:?} / {}", a.question_id, a.question_type, a.topics, a.error_type);
    }
    for s in &outcome.skipped {
        println!("skipped {}: {}", s.question_id, s.reason);
    }
    Ok(())
}
