//! Evaluate–reflect–regenerate loop: each analysis bundle is scored on a
//! five-dimension 1–4 rubric, and unless every score meets the threshold the
//! model writes a reflection that conditions the next generation, up to a
//! fixed iteration budget.

use std::collections::BTreeMap;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::insight::{digest_bundle, generate_analysis, InsightBundle, InsightError};
use crate::profile::TableProfile;
use crate::semantics::{ConceptSet, DomainFinding};
use crate::util::{char_prefix, clip_with_ellipsis};

pub const EVALUATION_TAG: &str = "evaluation_report";
pub const REFLECTION_TAG: &str = "reflection";
pub const REFLECTION_MAX_CHARS: usize = 2000;

/// Rubric text embedded verbatim in every evaluation prompt. Versioned file:
/// editing it changes evaluation fingerprints, so bump the version instead.
pub const LOOP_RUBRIC: &str = include_str!("../assets/rubric_loop_v1.txt");

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    DomainAccuracy,
    ConceptQuality,
    Insightfulness,
    Novelty,
    Depth,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::DomainAccuracy,
        Dimension::ConceptQuality,
        Dimension::Insightfulness,
        Dimension::Novelty,
        Dimension::Depth,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::DomainAccuracy => "domain_accuracy",
            Dimension::ConceptQuality => "concept_quality",
            Dimension::Insightfulness => "insightfulness",
            Dimension::Novelty => "novelty",
            Dimension::Depth => "depth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scores: BTreeMap<Dimension, u8>,
    pub justifications: BTreeMap<Dimension, String>,
}

impl EvaluationReport {
    /// Same score and justification on every dimension; scripted-harness
    /// convenience.
    pub fn uniform(score: u8, justification: &str) -> Self {
        EvaluationReport {
            scores: Dimension::ALL.iter().map(|d| (*d, score)).collect(),
            justifications: Dimension::ALL
                .iter()
                .map(|d| (*d, justification.to_string()))
                .collect(),
        }
    }

    pub fn min_score(&self) -> u8 {
        self.scores.values().copied().min().unwrap_or(0)
    }

    pub fn total_score(&self) -> u32 {
        self.scores.values().map(|&s| s as u32).sum()
    }

    pub fn mean_score(&self) -> f64 {
        self.total_score() as f64 / Dimension::ALL.len() as f64
    }

    /// All five dimensions present, scores in 1..=4, justifications non-blank.
    pub fn validate(&self) -> Result<(), String> {
        for d in Dimension::ALL {
            match self.scores.get(&d) {
                None => return Err(format!("missing score for {}", d.key())),
                Some(s) if !(1..=4).contains(s) => {
                    return Err(format!("score {s} for {} outside 1..=4", d.key()))
                }
                _ => {}
            }
            match self.justifications.get(&d) {
                None => return Err(format!("missing justification for {}", d.key())),
                Some(j) if j.trim().is_empty() => {
                    return Err(format!("blank justification for {}", d.key()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One completed iteration as remembered by later prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub iteration: usize,
    pub bundle_digest: String,
    pub report: EvaluationReport,
    /// None on the terminal iteration — the loop never reflects after it.
    pub reflection: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReflectionMemory {
    pub entries: Vec<MemoryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ThresholdMet,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    /// One entry per executed iteration, index == iteration.
    pub entries: Vec<MemoryEntry>,
    pub termination_reason: TerminationReason,
    pub best_iteration: usize,
}

/// Everything produced during one iteration; the orchestrator persists these
/// as per-iteration artifacts.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub bundle: InsightBundle,
    pub report: EvaluationReport,
    pub reflection: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub best: InsightBundle,
    pub trace: LoopTrace,
    pub records: Vec<IterationRecord>,
    pub memory: ReflectionMemory,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum LoopStageError {
    #[error(transparent)]
    Insight(#[from] InsightError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Config(String),
}

/// Loop abort carrying every fully completed iteration, so partial artifacts
/// can still be persisted.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{stage} failed at iteration {iteration}: {error}")]
pub struct LoopFailure {
    pub stage: &'static str,
    pub iteration: usize,
    pub error: LoopStageError,
    pub records: Vec<IterationRecord>,
}

static EVALUATION_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    let per_dimension = json!({
        "type": "object",
        "required": ["score", "justification"],
        "properties": {
            "score": {"type": "integer", "minimum": 1, "maximum": 4},
            "justification": {"type": "string", "minLength": 1}
        },
        "additionalProperties": false
    });
    let mut properties = serde_json::Map::new();
    for d in Dimension::ALL {
        properties.insert(d.key().to_string(), per_dimension.clone());
    }
    json!({
        "type": "object",
        "required": Dimension::ALL.iter().map(|d| d.key()).collect::<Vec<_>>(),
        "properties": properties,
        "additionalProperties": false
    })
});

fn context_block(profile: &TableProfile, domain: &DomainFinding, concepts: &ConceptSet) -> String {
    let mut s = String::new();
    s.push_str("Dataset structure:\n\n");
    s.push_str(&profile.synopsis());
    s.push_str(&format!("\nDomain: {} — {}\n", domain.label, domain.definition));
    s.push_str("\nConcepts:\n");
    for c in &concepts.concepts {
        s.push_str(&format!("- {} (columns: {})\n", c.phrase, c.linked_columns.join(", ")));
    }
    s
}

/// One structured call scoring the bundle on every rubric dimension.
pub fn evaluate(
    bundle: &InsightBundle,
    domain: &DomainFinding,
    concepts: &ConceptSet,
    profile: &TableProfile,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<EvaluationReport, GatewayError> {
    let bundle_json = serde_json::to_string_pretty(bundle).expect("bundle serializes");
    let prompt = format!(
        "{rubric}\n{context}\nAnalysis to score (iteration {iter}):\n{bundle_json}\n\n\
         Score the analysis on each rubric dimension and justify each rating in one or \
         two sentences. Reply with JSON: {{\"domain_accuracy\": {{\"score\": 1-4, \
         \"justification\": \"...\"}}, \"concept_quality\": {{...}}, \"insightfulness\": \
         {{...}}, \"novelty\": {{...}}, \"depth\": {{...}}}}",
        rubric = LOOP_RUBRIC,
        context = context_block(profile, domain, concepts),
        iter = bundle.iteration,
    );
    let request = ChatRequest::new(
        &config.judge_model_id,
        vec![
            ChatMessage::system("You score data analyses strictly against the given rubric."),
            ChatMessage::user(prompt),
        ],
        config.temperatures.evaluation,
    )
    .with_schema_tag(EVALUATION_TAG);
    let raw = gateway.complete_structured(&request, &EVALUATION_SCHEMA)?;

    let mut scores = BTreeMap::new();
    let mut justifications = BTreeMap::new();
    for d in Dimension::ALL {
        let entry = &raw[d.key()];
        scores.insert(d, entry["score"].as_u64().unwrap_or(0) as u8);
        justifications
            .insert(d, entry["justification"].as_str().unwrap_or_default().to_string());
    }
    Ok(EvaluationReport { scores, justifications })
}

/// The reflection prompt is pure in its inputs. The deficient-dimension line
/// names exactly the dimensions scoring below `threshold`.
pub fn build_reflection_prompt(
    report: &EvaluationReport,
    bundle: &InsightBundle,
    memory: &ReflectionMemory,
    threshold: u8,
) -> String {
    let mut p = String::new();
    p.push_str("Your data analysis was scored against a rubric.\n\nScores:\n");
    for d in Dimension::ALL {
        p.push_str(&format!(
            "- {}: {}/4 — {}\n",
            d.key(),
            report.scores.get(&d).copied().unwrap_or(0),
            report.justifications.get(&d).map(String::as_str).unwrap_or("")
        ));
    }
    let deficient: Vec<&str> = Dimension::ALL
        .iter()
        .filter(|d| report.scores.get(d).copied().unwrap_or(0) < threshold)
        .map(|d| d.key())
        .collect();
    p.push_str(&format!(
        "\nDimensions below the acceptance threshold of {threshold}: {}\n",
        deficient.join(", ")
    ));
    p.push_str(&format!("\nThe analysis being scored: {}\n", digest_bundle(bundle)));
    if !memory.entries.is_empty() {
        p.push_str("\nEarlier reflections:\n");
        for entry in &memory.entries {
            if let Some(r) = &entry.reflection {
                p.push_str(&format!(
                    "- iteration {}: {}\n",
                    entry.iteration,
                    clip_with_ellipsis(r, 120)
                ));
            }
        }
    }
    p.push_str(
        "\nWrite a reflection, under 2000 characters, that addresses each \
         below-threshold dimension by name and says concretely what the next \
         analysis iteration must do differently to raise it.",
    );
    p
}

/// Free-text self-reflection, truncated to 2000 characters plus a marker.
pub fn reflect(
    report: &EvaluationReport,
    bundle: &InsightBundle,
    memory: &ReflectionMemory,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<String, GatewayError> {
    let prompt = build_reflection_prompt(report, bundle, memory, config.threshold);
    let request = ChatRequest::new(
        &config.model_id,
        vec![
            ChatMessage::system("You critique your own analysis and plan how to improve it."),
            ChatMessage::user(prompt),
        ],
        config.temperatures.reflection,
    )
    .with_schema_tag(REFLECTION_TAG);
    let text = gateway.complete(&request)?.text;
    if text.chars().count() > REFLECTION_MAX_CHARS {
        Ok(format!("{}...", char_prefix(&text, REFLECTION_MAX_CHARS)))
    } else {
        Ok(text)
    }
}

fn memory_entry(record: &IterationRecord) -> MemoryEntry {
    MemoryEntry {
        iteration: record.iteration,
        bundle_digest: digest_bundle(&record.bundle),
        report: record.report.clone(),
        reflection: record.reflection.clone(),
    }
}

/// Best iteration under budget exhaustion: highest total score, latest wins
/// ties. Threshold termination always ships the terminal iteration — it is
/// the only one guaranteed to clear the bar on every dimension.
fn best_by_total(records: &[IterationRecord]) -> usize {
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.report.total_score() >= records[best].report.total_score() {
            best = i;
        }
    }
    best
}

/// Generate → evaluate → (reflect …) loop with early exit once every score
/// meets the threshold.
pub fn run_loop(
    profile: &TableProfile,
    domain: &DomainFinding,
    concepts: &ConceptSet,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<LoopOutcome, LoopFailure> {
    let fail = |stage: &'static str, iteration: usize, error: LoopStageError, records: &[IterationRecord]| {
        LoopFailure { stage, iteration, error, records: records.to_vec() }
    };
    if config.n_max == 0 {
        return Err(fail("config", 0, LoopStageError::Config("n_max must be at least 1".into()), &[]));
    }
    if !(1..=4).contains(&config.threshold) {
        return Err(fail(
            "config",
            0,
            LoopStageError::Config(format!("threshold {} outside 1..=4", config.threshold)),
            &[],
        ));
    }

    let n_max = config.n_max as usize;
    let mut memory = ReflectionMemory::default();
    let mut records: Vec<IterationRecord> = Vec::new();
    for k in 0..n_max {
        let (bundle, warnings) =
            generate_analysis(profile, domain, concepts, &memory, gateway, config)
                .map_err(|e| fail("generate", k, e.into(), &records))?;
        let report = evaluate(&bundle, domain, concepts, profile, gateway, config)
            .map_err(|e| fail("evaluate", k, e.into(), &records))?;

        let threshold_hit = report.min_score() >= config.threshold;
        let budget_done = k + 1 == n_max;
        if threshold_hit || budget_done {
            records.push(IterationRecord { iteration: k, bundle, report, reflection: None, warnings });
            // Terminal entry joins memory unless the loop never looped at all.
            if !(threshold_hit && k == 0) {
                memory.entries.push(memory_entry(&records[k]));
            }
            let (reason, best) = if threshold_hit {
                (TerminationReason::ThresholdMet, k)
            } else {
                (TerminationReason::BudgetExhausted, best_by_total(&records))
            };
            let trace = LoopTrace {
                entries: records.iter().map(memory_entry).collect(),
                termination_reason: reason,
                best_iteration: best,
            };
            return Ok(LoopOutcome { best: records[best].bundle.clone(), trace, records, memory });
        }

        let reflection = reflect(&report, &bundle, &memory, gateway, config)
            .map_err(|e| fail("reflect", k, e.into(), &records))?;
        records.push(IterationRecord {
            iteration: k,
            bundle,
            report,
            reflection: Some(reflection),
            warnings,
        });
        memory.entries.push(memory_entry(&records[k]));
    }
    unreachable!("loop exits via threshold or budget")
}
