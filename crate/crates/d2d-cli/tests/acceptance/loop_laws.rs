//! State-machine laws of the evaluate–reflect–regenerate loop, checked
//! against a scripted evaluator over 1000 random score sequences plus
//! deterministic edge scripts. For every run the loop must obey:
//!
//! * iterations = first threshold-clearing index + 1, else the full budget;
//! * generate and evaluate are called once per iteration, reflect once per
//!   non-terminal iteration;
//! * the terminal iteration never carries a reflection;
//! * memory holds every iteration except a first-try threshold hit, which
//!   leaves memory empty;
//! * threshold termination ships the terminal bundle; budget exhaustion
//!   ships the highest total score, latest iteration winning ties.

use std::sync::Arc;

use d2d_core::config::RunConfig;
use d2d_core::gateway::{Gateway, GatewayConfig, GatewayMode};
use d2d_core::insight::INSIGHT_BUNDLE_TAG;
use d2d_core::profile::{build_profile, ProfileConfig, TableProfile};
use d2d_core::reflexion::{
    run_loop, Dimension, TerminationReason, EVALUATION_TAG, REFLECTION_TAG,
};
use d2d_core::semantics::{Concept, ConceptSet, DomainFinding};
use d2d_core::testing::{CountingTransport, ScriptedTransport};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn profile() -> TableProfile {
    let typed = crate::table_from_csv("region,sales\nnorth,10\nsouth,20\nnorth,30\n");
    build_profile(&typed, &ProfileConfig::default())
}

fn domain() -> DomainFinding {
    DomainFinding {
        label: "Regional Sales".into(),
        definition: "Sales totals by region.".into(),
        rationale: "r".into(),
        knowledge_snippets_used: vec![],
    }
}

fn concepts() -> ConceptSet {
    ConceptSet {
        concepts: vec![Concept {
            phrase: "regional split".into(),
            linked_columns: vec!["region".into(), "sales".into()],
            rationale: "r".into(),
        }],
    }
}

const BUNDLE_JSON: &str = r#"{"descriptive":[{"statement":"d","evidence":[]}],"predictive":[{"statement":"p","evidence":[]}],"domain_related":[{"statement":"r","evidence":[]}]}"#;

fn eval_json(scores: [u8; 5]) -> String {
    let pieces: Vec<String> = Dimension::ALL
        .iter()
        .zip(scores)
        .map(|(d, s)| format!(r#""{}": {{"score": {s}, "justification": "j"}}"#, d.key()))
        .collect();
    format!("{{{}}}", pieces.join(", "))
}

fn gateway(t: Arc<dyn d2d_core::gateway::Transport>) -> Gateway {
    Gateway::new(
        GatewayConfig { mode: GatewayMode::Live, backoff_base_ms: 0, ..Default::default() },
        Some(t),
    )
    .unwrap()
}

/// What the laws predict for a given score matrix.
struct Expected {
    iterations: usize,
    reason: TerminationReason,
    best: usize,
    memory_len: usize,
}

fn predict(scores: &[[u8; 5]], threshold: u8) -> Expected {
    let n_max = scores.len();
    let hit = scores.iter().position(|row| row.iter().all(|&s| s >= threshold));
    match hit {
        Some(k) => Expected {
            iterations: k + 1,
            reason: TerminationReason::ThresholdMet,
            best: k,
            memory_len: if k == 0 { 0 } else { k + 1 },
        },
        None => {
            let total = |row: &[u8; 5]| row.iter().map(|&s| s as u32).sum::<u32>();
            let mut best = 0;
            for (i, row) in scores.iter().enumerate() {
                if total(row) >= total(&scores[best]) {
                    best = i;
                }
            }
            Expected {
                iterations: n_max,
                reason: TerminationReason::BudgetExhausted,
                best,
                memory_len: n_max,
            }
        }
    }
}

/// Runs the loop against a script derived from `scores` and checks every law.
/// The script holds exactly the predicted number of replies, so an extra
/// model call panics the scripted transport and a missing one trips the
/// remaining-replies assertion.
fn check_sequence(scores: &[[u8; 5]], threshold: u8, label: &str) {
    let expected = predict(scores, threshold);
    let mut script: Vec<String> = Vec::new();
    for k in 0..expected.iterations {
        script.push(BUNDLE_JSON.to_string());
        script.push(eval_json(scores[k]));
        if k + 1 < expected.iterations {
            script.push("focus harder on the deficient dimensions".to_string());
        }
    }
    let scripted = ScriptedTransport::new(
        script.into_iter().map(|t| Ok(d2d_core::gateway::ChatResponse::text_only(t))),
    );
    let counting = CountingTransport::wrap(scripted.clone());
    let gw = gateway(counting.clone());
    let config = RunConfig {
        n_max: scores.len() as u32,
        threshold,
        ..RunConfig::default()
    };

    let outcome = run_loop(&profile(), &domain(), &concepts(), &gw, &config)
        .unwrap_or_else(|e| panic!("{label}: loop failed: {e}"));

    let it = expected.iterations;
    assert_eq!(outcome.records.len(), it, "{label}: iteration count");
    assert_eq!(outcome.trace.entries.len(), it, "{label}: trace length");
    assert_eq!(outcome.trace.termination_reason, expected.reason, "{label}: reason");
    assert_eq!(outcome.trace.best_iteration, expected.best, "{label}: best iteration");
    assert_eq!(outcome.memory.entries.len(), expected.memory_len, "{label}: memory length");

    assert_eq!(counting.count(INSIGHT_BUNDLE_TAG), it, "{label}: generate calls");
    assert_eq!(counting.count(EVALUATION_TAG), it, "{label}: evaluate calls");
    assert_eq!(counting.count(REFLECTION_TAG), it - 1, "{label}: reflect calls");
    assert_eq!(counting.total(), 3 * it - 1, "{label}: total calls");
    assert_eq!(scripted.remaining(), 0, "{label}: unconsumed scripted replies");

    for (idx, record) in outcome.records.iter().enumerate() {
        assert_eq!(record.iteration, idx, "{label}: record index");
        assert_eq!(
            record.bundle.iteration, idx,
            "{label}: bundle stamped with its iteration"
        );
        let row: Vec<u8> = Dimension::ALL
            .iter()
            .map(|d| record.report.scores[d])
            .collect();
        assert_eq!(row, scores[idx].to_vec(), "{label}: recorded scores");
        let terminal = idx + 1 == it;
        assert_eq!(
            record.reflection.is_none(),
            terminal,
            "{label}: reflection exactly on non-terminal iterations"
        );
        assert_eq!(outcome.trace.entries[idx].iteration, idx, "{label}: trace index");
        assert_eq!(
            outcome.trace.entries[idx].reflection, record.reflection,
            "{label}: trace mirrors records"
        );
    }
    for (idx, entry) in outcome.memory.entries.iter().enumerate() {
        assert_eq!(entry.iteration, idx, "{label}: memory index");
    }
    assert_eq!(
        outcome.best.iteration, expected.best,
        "{label}: shipped bundle comes from the best iteration"
    );
}

#[test]
fn criterion_3_reflexion_loop_laws_hold_over_random_sequences() {
    // Deterministic edges first: first-try success at the strictest
    // threshold, a tie on totals under budget exhaustion (latest must win),
    // a strictly decreasing run (early iteration must win), and a full
    // budget at n_max = 1.
    check_sequence(&[[4, 4, 4, 4, 4]], 4, "first-try success");
    check_sequence(
        &[[3, 3, 3, 3, 3], [2, 3, 3, 3, 4], [1, 4, 4, 3, 3]],
        4,
        "three-way total tie",
    );
    check_sequence(&[[3, 3, 3, 3, 3], [2, 2, 2, 2, 2]], 4, "decreasing totals");
    check_sequence(&[[1, 1, 1, 1, 1]], 4, "single-iteration budget");
    check_sequence(&[[2, 2, 2, 2, 2], [4, 4, 4, 4, 4], [1, 1, 1, 1, 1]], 4, "mid-loop success");

    // Invalid configurations must fail before any model call.
    for (n_max, threshold) in [(0u32, 4u8), (3, 0), (3, 5)] {
        let counting = CountingTransport::wrap(ScriptedTransport::texts([]));
        let gw = gateway(counting.clone());
        let config = RunConfig { n_max, threshold, ..RunConfig::default() };
        let err = run_loop(&profile(), &domain(), &concepts(), &gw, &config)
            .expect_err("invalid config must be rejected");
        assert_eq!(err.stage, "config");
        assert_eq!(counting.total(), 0, "config errors must precede model calls");
    }

    let mut rng = StdRng::seed_from_u64(0xD2D_0003);
    let mut threshold_met = 0usize;
    let mut budget_exhausted = 0usize;
    let mut first_try = 0usize;
    for trial in 0..1000 {
        let n_max = rng.gen_range(1..=4usize);
        let threshold = rng.gen_range(1..=4u8);
        let scores: Vec<[u8; 5]> = (0..n_max)
            .map(|_| std::array::from_fn(|_| rng.gen_range(1..=4u8)))
            .collect();
        let expected = predict(&scores, threshold);
        match expected.reason {
            TerminationReason::ThresholdMet => {
                threshold_met += 1;
                if expected.iterations == 1 {
                    first_try += 1;
                }
            }
            TerminationReason::BudgetExhausted => budget_exhausted += 1,
        }
        check_sequence(&scores, threshold, &format!("trial {trial}"));
    }
    // The random drive must actually exercise every regime.
    assert!(threshold_met > 100, "threshold terminations seen: {threshold_met}");
    assert!(budget_exhausted > 100, "budget terminations seen: {budget_exhausted}");
    assert!(first_try > 50, "first-try successes seen: {first_try}");
}
