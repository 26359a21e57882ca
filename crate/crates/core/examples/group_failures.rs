//! Group analyses by type-topic key and print each group's error profile.

use mars::allocation::group_by_type_topic;
use mars::taxonomy::{ErrorType, FailureAnalysis, QuestionType};

fn analysis(id: &str, qt: QuestionType, topics: &[&str], et: ErrorType, cause: &str) -> FailureAnalysis {
    FailureAnalysis {
        question_id: id.into(),
        question_type: qt,
        topics: topics.iter().map(|t| t.to_string()).collect(),
        error_type: et,
        root_cause: cause.into(),
        specific_mistake: String::new(),
        requires_knowledge: vec![],
        difficulty_factors: vec![],
    }
}

fn main() -> mars::Result<()> {
    use ErrorType::*;
    use QuestionType::*;
    let analyses = vec![
        analysis("q1", Calculation, &["thermodynamics", "entropy"], CalculationError, "sign of Q"),
        // topic order and a third topic do not change the key
        analysis("q2", Calculation, &["entropy", "thermodynamics", "heat"], Misreading, "read T in Celsius"),
        analysis("q3", Conceptual, &["genetics"], KnowledgeGap, "forgot codominance"),
        analysis("q4", Calculation, &["thermodynamics", "entropy"], CalculationError, "sign of Q"),
    ];
    for g in group_by_type_topic(&analyses)? {
        println!("{} x{}", g.key(), g.len());
        println!("  errors: {:?}", g.error_types());
        println!("  causes: {:?}", g.root_causes());
    }
    Ok(())
}
