//! LLM-judged scoring of insight artifacts on a 1–4 rubric, normalized to
//! [0,1], with pairwise relative-lift comparison between two score maps.
//!
//! Two scoring routes share one prompt: when the transport exposes token
//! log-probabilities over the score digits, the score is the
//! probability-weighted expectation from a single call; otherwise it is the
//! mean of several independent integer samples at the judge temperature.
//! Independent metrics may be scored concurrently by callers — results are
//! order-independent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::gateway::{
    ChatMessage, ChatRequest, Gateway, GatewayError, StructuredOutputError,
};
use crate::semantics::DomainFinding;

pub const JUDGE_RUBRIC: &str = include_str!("../assets/rubric_judge_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Insightfulness,
    Novelty,
    Depth,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Insightfulness, Metric::Novelty, Metric::Depth];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Insightfulness => "insightfulness",
            Metric::Novelty => "novelty",
            Metric::Depth => "depth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: Metric,
    /// In [1,4]; integer-valued when `weighted` is false.
    pub raw: f64,
    /// (raw − 1) / 3.
    pub normalized: f64,
    /// True when token-probability weighting produced `raw`.
    pub weighted: bool,
    pub n_samples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub metric: Metric,
    pub baseline: f64,
    pub candidate: f64,
    /// (candidate − baseline) / baseline × 100, rounded to nearest integer.
    pub lift_percent: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub rows: Vec<LiftRow>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("score {raw} outside the rubric range [1,4]")]
    Range { raw: f64 },
    #[error("baseline score for {} is zero; relative lift is undefined", metric.key())]
    DivisionByZero { metric: Metric },
    #[error("reports disagree on metrics: baseline-only {baseline_only:?}, candidate-only {candidate_only:?}")]
    MetricMismatch { baseline_only: Vec<Metric>, candidate_only: Vec<Metric> },
}

/// Affine map from the 1–4 rubric scale onto [0,1]. Strictly monotone;
/// 1 ↦ 0 and 4 ↦ 1 exactly.
pub fn normalize(raw: f64) -> Result<f64, EvalError> {
    if !(1.0..=4.0).contains(&raw) {
        return Err(EvalError::Range { raw });
    }
    Ok((raw - 1.0) / 3.0)
}

/// Domain framing handed to the judge alongside the artifact.
#[derive(Debug, Clone, Copy)]
pub struct JudgeContext<'a> {
    pub domain: &'a DomainFinding,
    pub concepts_digest: &'a str,
}

/// The rubric section for one metric, sliced out of the versioned asset.
fn metric_rubric(metric: Metric) -> &'static str {
    let marker = match metric {
        Metric::Insightfulness => "## insightfulness",
        Metric::Novelty => "## novelty",
        Metric::Depth => "## depth",
    };
    let start = JUDGE_RUBRIC.find(marker).expect("rubric asset has all metric sections");
    let body = &JUDGE_RUBRIC[start..];
    match body[marker.len()..].find("\n## ") {
        Some(end) => &body[..marker.len() + end],
        None => body,
    }
}

fn judge_prompt(metric: Metric, artifact_text: &str, context: &JudgeContext) -> Vec<ChatMessage> {
    let system = format!(
        "You are a strict evaluator of data-analysis insights. Score one metric \
         on the 1-4 scale below.\n\n{}\n\nWork through the evaluation steps \
         before deciding, but reply with only the final score digit (1, 2, 3, \
         or 4) and nothing else.",
        metric_rubric(metric)
    );
    let user = format!(
        "Domain: {} — {}\nDomain concepts: {}\n\nInsight artifact to score on \
         {}:\n{}\n\nReply with only the score digit.",
        context.domain.label,
        context.domain.definition,
        context.concepts_digest,
        metric.key(),
        artifact_text
    );
    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

/// First standalone digit in 1..=4 (neighbours must not be digits, so "14"
/// and years never match).
fn parse_score(text: &str) -> Option<u8> {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b'1'..=b'4').contains(&b) {
            let prev_digit = i > 0 && bytes[i - 1].is_ascii_digit();
            let next_digit = i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit();
            if !prev_digit && !next_digit {
                return Some(b - b'0');
            }
        }
    }
    None
}

/// Probability-weighted expected score from first-position token candidates.
/// Returns None when the distribution carries no score digits, which is the
/// signal to fall back to integer sampling.
fn weighted_raw(token_scores: &[crate::gateway::TokenScore]) -> Option<f64> {
    let mut mass = [0.0f64; 4];
    for ts in token_scores {
        if let Some(s) = parse_digit_token(&ts.token) {
            mass[(s - 1) as usize] += ts.logprob.exp();
        }
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let expected = mass
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 + 1.0) * p / total)
        .sum();
    Some(expected)
}

fn parse_digit_token(token: &str) -> Option<u8> {
    match token.trim() {
        "1" => Some(1),
        "2" => Some(2),
        "3" => Some(3),
        "4" => Some(4),
        _ => None,
    }
}

/// One integer score, with a single repair exchange when the reply carries no
/// parseable digit.
fn sample_score(
    gateway: &Gateway,
    base: &ChatRequest,
) -> Result<u8, EvalError> {
    let first = gateway.complete(base)?;
    if let Some(s) = parse_score(&first.text) {
        return Ok(s);
    }
    let mut retry = base.clone();
    retry.messages.push(ChatMessage::assistant(first.text.clone()));
    retry.messages.push(ChatMessage::user(
        "That reply did not contain a score. Respond with a single digit from 1 to 4 \
         and nothing else."
            .to_string(),
    ));
    let second = gateway.complete(&retry)?;
    if let Some(s) = parse_score(&second.text) {
        return Ok(s);
    }
    Err(EvalError::Gateway(GatewayError::Structured(StructuredOutputError {
        attempts: 2,
        errors_per_attempt: vec![
            vec![format!("no standalone score digit 1-4 in reply: {:?}", clip(&first.text))],
            vec![format!("no standalone score digit 1-4 in reply: {:?}", clip(&second.text))],
        ],
    })))
}

fn clip(s: &str) -> String {
    s.chars().take(80).collect()
}

/// Scores `artifact_text` on one metric with the configured judge model.
///
/// When `judge_weighted` is set the call requests token log-probabilities and
/// uses the renormalized expectation over the digits 1–4 (one call,
/// `weighted=true`); if the transport yields no usable distribution, or
/// weighting is disabled, the score is the mean of `judge_samples`
/// independent integer samples. Each sample carries a distinct schema tag so
/// record/replay keeps the samples apart.
pub fn g_eval_score(
    metric: Metric,
    artifact_text: &str,
    context: &JudgeContext,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<MetricScore, EvalError> {
    assert!(!artifact_text.trim().is_empty(), "artifact text must be non-empty");
    let messages = judge_prompt(metric, artifact_text, context);
    let base = ChatRequest::new(
        config.judge_model_id.clone(),
        messages,
        config.temperatures.judge,
    );

    if config.judge_weighted {
        let req = base
            .clone()
            .with_schema_tag(format!("{}_score#w", metric.key()))
            .with_logprobs();
        let response = gateway.complete(&req)?;
        if let Some(raw) = response.token_scores.as_deref().and_then(weighted_raw) {
            return Ok(MetricScore {
                metric,
                raw,
                normalized: normalize(raw)?,
                weighted: true,
                n_samples: 1,
            });
        }
        // No score-token distribution from this transport; sample instead.
    }

    let n = config.judge_samples.max(1);
    let mut total = 0u32;
    for k in 0..n {
        let req = base.clone().with_schema_tag(format!("{}_score#s{k}", metric.key()));
        total += sample_score(gateway, &req)? as u32;
    }
    let raw = f64::from(total) / f64::from(n);
    Ok(MetricScore { metric, raw, normalized: normalize(raw)?, weighted: false, n_samples: n })
}

/// Per-metric relative lift of `candidate` over `baseline`, both keyed by
/// metric with normalized scores as values.
pub fn compare_reports(
    baseline: &BTreeMap<Metric, f64>,
    candidate: &BTreeMap<Metric, f64>,
) -> Result<LiftReport, EvalError> {
    let baseline_only: Vec<Metric> =
        baseline.keys().filter(|m| !candidate.contains_key(m)).copied().collect();
    let candidate_only: Vec<Metric> =
        candidate.keys().filter(|m| !baseline.contains_key(m)).copied().collect();
    if !baseline_only.is_empty() || !candidate_only.is_empty() {
        return Err(EvalError::MetricMismatch { baseline_only, candidate_only });
    }

    let mut rows = Vec::with_capacity(baseline.len());
    for (&metric, &b) in baseline {
        let c = candidate[&metric];
        if b == 0.0 {
            return Err(EvalError::DivisionByZero { metric });
        }
        let lift_percent = ((c - b) / b * 100.0).round() as i64;
        rows.push(LiftRow { metric, baseline: b, candidate: c, lift_percent });
    }
    Ok(LiftReport { rows })
}

/// Fixed-width text rendering of a lift report, one row per metric.
pub fn format_lift_table(report: &LiftReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>9} {:>10} {:>6}", "metric", "baseline", "candidate", "lift");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<16} {:>9.3} {:>10.3} {:>+5}%",
            row.metric.key(),
            row.baseline,
            row.candidate,
            row.lift_percent
        );
    }
    out
}
