mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use mars::allocation::group_by_type_topic;
use mars::gateway::{
    estimate_cost, ChatBackend, ChatRequest, CostLedger, MockBackend, MockRule, MockScript,
    ModelHandle, Pick, Role,
};
use mars::harness::{majority_vote, score_token_f1};
use mars::hybrid::{split_dataset, SplitSpec};
use mars::synthesis::render_enhanced_prompts;
use mars::taxonomy::{make_key, BenchmarkItem, Enhancement, QuestionType, TypeTopicKey, VariantKind};
use proptest::prelude::*;
use rand::SeedableRng;

fn arb_analyses() -> impl Strategy<Value = Vec<mars::taxonomy::FailureAnalysis>> {
    (any::<u64>(), 1usize..120).prop_map(|(seed, n)| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        common::random_analyses(&mut rng, n)
    })
}

fn arb_items() -> impl Strategy<Value = Vec<BenchmarkItem>> {
    prop::collection::vec(0usize..4, 1..150).prop_map(|cats| {
        cats.into_iter()
            .enumerate()
            .map(|(i, c)| BenchmarkItem {
                id: format!("q{i}"),
                question: format!("question {i}"),
                options: vec![],
                answer: "x".into(),
                category: format!("cat{c}"),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn grouping_is_a_partition(analyses in arb_analyses()) {
        let groups = group_by_type_topic(&analyses).unwrap();
        prop_assert_eq!(groups.iter().map(|g| g.len()).sum::<usize>(), analyses.len());
        let keys: BTreeSet<_> = groups.iter().map(|g| g.key().clone()).collect();
        prop_assert_eq!(keys.len(), groups.len());
        for w in groups.windows(2) {
            prop_assert!(w[0].len() >= w[1].len());
        }
        for g in &groups {
            for a in g.analyses() {
                prop_assert_eq!(&make_key(a).unwrap(), g.key());
            }
        }
    }

    #[test]
    fn key_ignores_topic_order_and_extras(
        qt in 0usize..6,
        a in "[a-z]{1,6}",
        b in "[a-z]{1,6}",
        extra in "[a-z]{1,6}",
    ) {
        let qt = QuestionType::ALL[qt];
        let ab = make_key(&common::analysis("x", qt, &[&a, &b, &extra])).unwrap();
        let ba = make_key(&common::analysis("x", qt, &[&b, &a])).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn vote_ignores_order_when_winner_is_strict(answers in prop::collection::vec("[abc]", 1..12), seed in any::<u64>()) {
        let mut counts = std::collections::BTreeMap::new();
        for a in &answers {
            *counts.entry(a.clone()).or_insert(0) += 1;
        }
        let max = *counts.values().max().unwrap();
        let winners: Vec<_> = counts.iter().filter(|(_, &c)| c == max).collect();
        let mut shuffled = answers.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let got = majority_vote(&shuffled).unwrap();
        if winners.len() == 1 {
            prop_assert_eq!(&got, winners[0].0);
            prop_assert_eq!(majority_vote(&answers).unwrap(), got);
        } else {
            prop_assert!(winners.iter().any(|(w, _)| **w == got));
        }
    }

    #[test]
    fn f1_is_symmetric_and_bounded(p in "[xyz .,]{0,20}", g in "[xyz .,]{0,20}") {
        let (pg, gp) = (score_token_f1(&p, &g), score_token_f1(&g, &p));
        prop_assert!((0.0..=1.0).contains(&pg));
        prop_assert!((pg - gp).abs() < 1e-12);
        prop_assert_eq!(score_token_f1(&p, &p), 1.0);
    }

    #[test]
    fn split_is_deterministic_disjoint_and_stratified(items in arb_items(), seed in any::<u64>()) {
        let spec = SplitSpec::with_seed(seed);
        let s = split_dataset(&items, &spec).unwrap();
        prop_assert_eq!(&s, &split_dataset(&items, &spec).unwrap());
        let ids = |v: &[BenchmarkItem]| v.iter().map(|i| i.id.clone()).collect::<BTreeSet<_>>();
        let (tr, va, te) = (ids(&s.train), ids(&s.val), ids(&s.test));
        prop_assert_eq!(tr.len() + va.len() + te.len(), items.len());
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        let cats: BTreeSet<_> = items.iter().map(|i| i.category.clone()).collect();
        for c in cats {
            let n = items.iter().filter(|i| i.category == c).count() as f64;
            let count = |v: &[BenchmarkItem]| v.iter().filter(|i| i.category == c).count() as f64;
            prop_assert!((count(&s.val) - n * spec.val_ratio).abs() <= 1.0);
            prop_assert!((count(&s.test) - n * spec.test_ratio).abs() <= 1.0);
        }
        // each split keeps input order
        for part in [&s.train, &s.val, &s.test] {
            let pos: Vec<usize> = part.iter().map(|i| items.iter().position(|x| x.id == i.id).unwrap()).collect();
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn ledger_totals_are_the_sum_of_phases(calls in prop::collection::vec((0usize..3, 0u64..5000, 0u64..5000), 0..60)) {
        let ledger = CostLedger::new();
        let handle = ModelHandle::mock("m").with_prices(0.0005, 0.0015);
        for &(r, p, c) in &calls {
            ledger.record(Role::ALL[r], &handle, mars::gateway::Usage { prompt_tokens: p, completion_tokens: c });
        }
        let report = estimate_cost(&ledger);
        let phases = Role::ALL.map(|r| report.phase(r));
        prop_assert_eq!(phases.iter().map(|p| p.calls).sum::<u64>(), calls.len() as u64);
        prop_assert_eq!(phases.iter().map(|p| p.tokens()).sum::<u64>(), report.total.tokens());
        prop_assert_eq!(phases.iter().map(|p| p.cost_micros).sum::<i64>(), report.total.cost_micros);
        prop_assert_eq!(report.total.tokens(), calls.iter().map(|c| c.1 + c.2).sum::<u64>());
    }

    #[test]
    fn rendering_lists_larger_groups_first(sizes in prop::collection::vec(1usize..30, 1..15)) {
        let enhancements: Vec<Enhancement> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| Enhancement {
                key: TypeTopicKey::new(QuestionType::Factual, [format!("topic{i:02}")]).unwrap(),
                num_questions: n,
                key_warnings: vec!["w".into()],
                common_mistakes: vec![],
                verification_steps: vec![],
                type_specific_approach: "a".into(),
                enhanced_prompt_addition: format!("size {n}"),
            })
            .collect();
        let prompts = render_enhanced_prompts("base", &enhancements, "c", &[VariantKind::Reasoning]).unwrap();
        let shown: Vec<usize> = prompts[&VariantKind::Reasoning]
            .suffix()
            .lines()
            .filter_map(|l| l.rsplit_once("size ").map(|(_, n)| n.parse().unwrap()))
            .collect();
        prop_assert_eq!(shown.len(), sizes.len().min(6));
        let mut sorted = sizes.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        prop_assert_eq!(&shown[..], &sorted[..shown.len()]);
    }

    #[test]
    fn seeded_mock_is_reproducible(seed in any::<u64>(), prompts in prop::collection::vec("[a-d]{1,4}", 1..10)) {
        let script = || MockScript::new(seed).rule(MockRule::any(["r0", "r1", "r2", "r3"]).pick(Pick::Seeded));
        let handle = ModelHandle::mock("m");
        let run = || {
            let backend: Arc<dyn ChatBackend> = Arc::new(MockBackend::new(script()));
            prompts
                .iter()
                .map(|p| backend.complete(&handle, &ChatRequest::user(p.as_str(), 0.0, 10)).unwrap().0)
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
