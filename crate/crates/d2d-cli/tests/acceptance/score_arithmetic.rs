//! Score arithmetic against fixed reference numbers.
//!
//! Criterion 7: the 1–4 → [0,1] normalization hits its published anchor
//! points, and recomputing relative lifts from the published normalized
//! score pairs reproduces the published lift percentages within ±2
//! percentage points. The assertion evaluates all six reference rows and
//! reports every one, so a single drifting row is visible in full context.
//!
//! Criterion 8: a deterministic stub judge yields hand-computable scores —
//! integer sampling averages exactly, and token-probability weighting
//! reproduces the closed-form expectation of a dyadic distribution.

use std::collections::BTreeMap;
use std::sync::Arc;

use d2d_core::config::RunConfig;
use d2d_core::gateway::{
    ChatRequest, ChatResponse, Gateway, GatewayConfig, GatewayMode, TokenScore, Transport,
};
use d2d_core::geval::{compare_reports, g_eval_score, normalize, JudgeContext, Metric};
use d2d_core::semantics::DomainFinding;
use d2d_core::testing::{responder, ScriptedTransport};

#[test]
fn criterion_7_normalization_and_lift_arithmetic_match_reference_tables() {
    // Anchor points of the affine rescaling.
    assert!((normalize(1.0).unwrap() - 0.0).abs() < 1e-12);
    assert!((normalize(2.95).unwrap() - 0.65).abs() < 1e-12);
    assert!((normalize(4.0).unwrap() - 1.0).abs() < 1e-12);

    // Published reference comparisons: normalized baseline/candidate scores
    // alongside the lift percentages printed next to them. Values are listed
    // (insightfulness, novelty, depth).
    struct Comparison {
        name: &'static str,
        baseline: [f64; 3],
        candidate: [f64; 3],
        printed_lift: [i64; 3],
    }
    let comparisons = [
        Comparison {
            name: "single-table study",
            baseline: [0.78, 0.65, 0.75],
            candidate: [0.88, 0.83, 0.99],
            printed_lift: [12, 28, 31],
        },
        Comparison {
            name: "ablation study",
            baseline: [0.32, 0.34, 0.36],
            candidate: [0.80, 0.61, 0.77],
            printed_lift: [147, 77, 113],
        },
    ];

    let mut report_lines = Vec::new();
    let mut violations = 0usize;
    for cmp in &comparisons {
        let to_map = |v: &[f64; 3]| -> BTreeMap<Metric, f64> {
            Metric::ALL.iter().copied().zip(v.iter().copied()).collect()
        };
        let lift = compare_reports(&to_map(&cmp.baseline), &to_map(&cmp.candidate))
            .expect("reference scores are well-formed");
        for (i, metric) in Metric::ALL.iter().enumerate() {
            let row = lift
                .rows
                .iter()
                .find(|r| r.metric == *metric)
                .expect("every metric present");
            let diff = (row.lift_percent - cmp.printed_lift[i]).abs();
            let verdict = if diff <= 2 { "ok" } else { "OUT OF TOLERANCE" };
            if diff > 2 {
                violations += 1;
            }
            report_lines.push(format!(
                "{:<20} {:<16} {:.2} -> {:.2}  recomputed {:+}%  printed {:+}%  |diff| {}  {}",
                cmp.name,
                metric.key(),
                cmp.baseline[i],
                cmp.candidate[i],
                row.lift_percent,
                cmp.printed_lift[i],
                diff,
                verdict
            ));
        }
    }
    assert!(
        violations == 0,
        "{violations} of 6 reference lift rows deviate by more than 2 percentage points \
         from the value recomputed off the published normalized scores:\n{}",
        report_lines.join("\n")
    );
}

// ---- criterion 8: hand-computable stub-judge scores ---------------------

fn gw(transport: Arc<dyn Transport>) -> Gateway {
    Gateway::new(
        GatewayConfig { mode: GatewayMode::Live, backoff_base_ms: 0, ..Default::default() },
        Some(transport),
    )
    .unwrap()
}

fn domain() -> DomainFinding {
    DomainFinding {
        label: "Retail Marketing".into(),
        definition: "Campaign performance across channels.".into(),
        rationale: "r".into(),
        knowledge_snippets_used: vec![],
    }
}

fn score(transport: Arc<dyn Transport>, weighted: bool, samples: u32) -> d2d_core::geval::MetricScore {
    let d = domain();
    let ctx = JudgeContext { domain: &d, concepts_digest: "churn; channel mix" };
    let config =
        RunConfig { judge_weighted: weighted, judge_samples: samples, ..Default::default() };
    g_eval_score(Metric::Depth, "Churn doubles after month 3.", &ctx, &gw(transport), &config)
        .expect("stub judge scores cleanly")
}

#[test]
fn criterion_8_stub_judge_scores_are_hand_computable() {
    // Five integer samples 3,4,3,2,3: mean 15/5 = 3 exactly.
    let s = score(ScriptedTransport::texts(["3", "4", "3", "2", "3"]), false, 5);
    assert_eq!(s.raw, 3.0);
    assert_eq!(s.normalized, 2.0 / 3.0);
    assert!(!s.weighted);
    assert_eq!(s.n_samples, 5);

    // Non-integer mean: 3,4,4,3,4 averages to 18/5 = 3.6.
    let s = score(ScriptedTransport::texts(["3", "4", "4", "3", "4"]), false, 5);
    assert!((s.raw - 3.6).abs() < 1e-12, "raw = {}", s.raw);
    assert!((s.normalized - 2.6 / 3.0).abs() < 1e-12);
    assert!(!s.weighted);

    // Dyadic token distribution p(1)=1/2, p(2)=1/4, p(3)=p(4)=1/8:
    // expectation 1*(1/2) + 2*(1/4) + 3*(1/8) + 4*(1/8) = 1.875.
    let t = responder(|_req: &ChatRequest| {
        Ok(ChatResponse {
            text: "1".into(),
            token_scores: Some(vec![
                TokenScore { token: "1".into(), logprob: 0.5f64.ln() },
                TokenScore { token: "2".into(), logprob: 0.25f64.ln() },
                TokenScore { token: "3".into(), logprob: 0.125f64.ln() },
                TokenScore { token: "4".into(), logprob: 0.125f64.ln() },
            ]),
            usage: Default::default(),
        })
    });
    let s = score(t, true, 5);
    assert!(s.weighted);
    assert_eq!(s.n_samples, 1);
    assert!((s.raw - 1.875).abs() < 1e-12, "raw = {}", s.raw);
    assert!((s.normalized - 0.875 / 3.0).abs() < 1e-12);

    // Distribution with an off-scale token: the digit masses renormalize.
    // p(2)=0.3, p(4)=0.3 among digits → expectation (2*0.3 + 4*0.3)/0.6 = 3.
    let t = responder(|_req: &ChatRequest| {
        Ok(ChatResponse {
            text: "4".into(),
            token_scores: Some(vec![
                TokenScore { token: "2".into(), logprob: 0.3f64.ln() },
                TokenScore { token: "4".into(), logprob: 0.3f64.ln() },
                TokenScore { token: "maybe".into(), logprob: 0.4f64.ln() },
            ]),
            usage: Default::default(),
        })
    });
    let s = score(t, true, 5);
    assert!(s.weighted);
    assert!((s.raw - 3.0).abs() < 1e-12, "raw = {}", s.raw);
}
