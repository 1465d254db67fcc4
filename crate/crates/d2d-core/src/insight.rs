//! Multi-lens analysis generation: one structured call produces descriptive,
//! predictive, and domain-related insights grounded in the profile and
//! concept set, conditioned on reflection memory from earlier iterations.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::profile::TableProfile;
use crate::reflexion::ReflectionMemory;
use crate::semantics::{ConceptSet, DomainFinding};
use crate::util::clip_with_ellipsis;

pub const MAX_PER_LENS: usize = 5;
pub const MAX_TOTAL_INSIGHTS: usize = 12;
pub const INSIGHT_BUNDLE_TAG: &str = "insight_bundle";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lens {
    Descriptive,
    Predictive,
    DomainRelated,
}

impl Lens {
    pub fn key(self) -> &'static str {
        match self {
            Lens::Descriptive => "descriptive",
            Lens::Predictive => "predictive",
            Lens::DomainRelated => "domain_related",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    /// Column name or concept phrase, canonicalized to the profile/concept
    /// spelling.
    pub reference: String,
    pub statistic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insight {
    pub lens: Lens,
    pub statement: String,
    pub evidence: Vec<EvidenceItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub viz_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightBundle {
    pub iteration: usize,
    pub descriptive: Vec<Insight>,
    pub predictive: Vec<Insight>,
    pub domain_related: Vec<Insight>,
}

impl InsightBundle {
    pub fn bucket(&self, lens: Lens) -> &[Insight] {
        match lens {
            Lens::Descriptive => &self.descriptive,
            Lens::Predictive => &self.predictive,
            Lens::DomainRelated => &self.domain_related,
        }
    }

    pub fn total(&self) -> usize {
        self.descriptive.len() + self.predictive.len() + self.domain_related.len()
    }
}

/// One line summarizing a bundle, used when replaying prior iterations into
/// the generation prompt.
pub fn digest_bundle(bundle: &InsightBundle) -> String {
    let lead = bundle
        .descriptive
        .first()
        .or(bundle.predictive.first())
        .or(bundle.domain_related.first())
        .map(|i| clip_with_ellipsis(&i.statement, 80))
        .unwrap_or_default();
    format!(
        "iteration {}: {} descriptive / {} predictive / {} domain_related; lead: \"{}\"",
        bundle.iteration,
        bundle.descriptive.len(),
        bundle.predictive.len(),
        bundle.domain_related.len(),
        lead
    )
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum InsightError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no valid insights left in lens(es) {lenses} after repair: {details}")]
    EmptyLens { lenses: String, details: String },
}

/// Bucket arrays carry no min/max: underfull lenses are handled by a semantic
/// repair exchange and overfull ones by truncation, so a schema retry is never
/// spent on either.
static BUNDLE_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    let insight = json!({
        "type": "object",
        "required": ["statement", "evidence"],
        "properties": {
            "statement": {"type": "string", "minLength": 1},
            "evidence": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["reference", "statistic"],
                    "properties": {
                        "reference": {"type": "string", "minLength": 1},
                        "statistic": {"type": "string", "minLength": 1}
                    },
                    "additionalProperties": false
                }
            },
            "viz_hint": {"type": "string", "minLength": 1}
        },
        "additionalProperties": false
    });
    json!({
        "type": "object",
        "required": ["descriptive", "predictive", "domain_related"],
        "properties": {
            "descriptive": {"type": "array", "items": insight},
            "predictive": {"type": "array", "items": insight},
            "domain_related": {"type": "array", "items": insight}
        },
        "additionalProperties": false
    })
});

/// The exact generation prompt as a pure function of its inputs; golden-file
/// tested, so any wording change must re-bless the fixture.
pub fn build_analysis_prompt(
    profile: &TableProfile,
    domain: &DomainFinding,
    concepts: &ConceptSet,
    memory: &ReflectionMemory,
) -> String {
    let mut p = String::new();
    p.push_str("A dataset has the following structure:\n\n");
    p.push_str(&profile.synopsis());
    p.push_str(&format!("\nDomain: {} — {}\n", domain.label, domain.definition));
    p.push_str("\nConcepts:\n");
    for c in &concepts.concepts {
        p.push_str(&format!(
            "- {} (columns: {}): {}\n",
            c.phrase,
            c.linked_columns.join(", "),
            c.rationale
        ));
    }
    if !memory.entries.is_empty() {
        p.push_str("\nEarlier analysis attempts:\n");
        for entry in &memory.entries {
            p.push_str(&format!("- {}\n", entry.bundle_digest));
        }
        if let Some(reflection) =
            memory.entries.iter().rev().find_map(|e| e.reflection.as_deref())
        {
            p.push_str("\nMost recent reflection on how to improve:\n");
            p.push_str(reflection);
            p.push('\n');
        }
    }
    p.push_str(
        "\nAnalyze this dataset through three lenses: descriptive (summarizing \
         distributions or outliers), predictive (inferring trends or likely outcomes), \
         and domain_related (grounded in the domain above). Produce novel, non-obvious \
         insights rather than surface-level observations. Give 1 to 5 insights per lens. \
         Each insight needs a statement, an evidence list pairing a column name or \
         concept phrase with a supporting statistic from the structure above, and \
         optionally a viz_hint suggesting how to chart it.\n\
         Reply with JSON: {\"descriptive\": [{\"statement\": \"...\", \"evidence\": \
         [{\"reference\": \"column or concept\", \"statistic\": \"...\"}], \
         \"viz_hint\": \"...\"}], \"predictive\": [...], \"domain_related\": [...]}",
    );
    p
}

fn canonical_reference(
    name: &str,
    profile: &TableProfile,
    concepts: &ConceptSet,
) -> Option<String> {
    if let Some(col) = profile.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name)) {
        return Some(col.name.clone());
    }
    concepts
        .concepts
        .iter()
        .find(|c| c.phrase.eq_ignore_ascii_case(name))
        .map(|c| c.phrase.clone())
}

fn parse_bucket(
    raw: &serde_json::Value,
    lens: Lens,
    profile: &TableProfile,
    concepts: &ConceptSet,
    warnings: &mut Vec<String>,
) -> Vec<Insight> {
    let mut out = Vec::new();
    for item in raw[lens.key()].as_array().into_iter().flatten() {
        let statement = item["statement"].as_str().unwrap_or_default().trim().to_string();
        if statement.is_empty() {
            warnings.push(format!("dropped {} insight with blank statement", lens.key()));
            continue;
        }
        let mut evidence = Vec::new();
        for ev in item["evidence"].as_array().into_iter().flatten() {
            let reference = ev["reference"].as_str().unwrap_or_default().trim();
            match canonical_reference(reference, profile, concepts) {
                Some(canonical) => evidence.push(EvidenceItem {
                    reference: canonical,
                    statistic: ev["statistic"].as_str().unwrap_or_default().to_string(),
                }),
                None => warnings.push(format!(
                    "{} insight {:?}: evidence reference {reference:?} matches no column \
                     or concept; dropped",
                    lens.key(),
                    clip_with_ellipsis(&statement, 40)
                )),
            }
        }
        let viz_hint = item["viz_hint"]
            .as_str()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from);
        out.push(Insight { lens, statement, evidence, viz_hint });
    }
    out
}

fn parse_buckets(
    raw: &serde_json::Value,
    profile: &TableProfile,
    concepts: &ConceptSet,
    warnings: &mut Vec<String>,
) -> [Vec<Insight>; 3] {
    [
        parse_bucket(raw, Lens::Descriptive, profile, concepts, warnings),
        parse_bucket(raw, Lens::Predictive, profile, concepts, warnings),
        parse_bucket(raw, Lens::DomainRelated, profile, concepts, warnings),
    ]
}

fn empty_lenses(buckets: &[Vec<Insight>; 3]) -> Vec<&'static str> {
    [Lens::Descriptive, Lens::Predictive, Lens::DomainRelated]
        .iter()
        .zip(buckets)
        .filter(|(_, b)| b.is_empty())
        .map(|(l, _)| l.key())
        .collect()
}

/// Enforce per-lens and total caps in place, recording warnings.
fn enforce_bounds(buckets: &mut [Vec<Insight>; 3], warnings: &mut Vec<String>) {
    for (lens, bucket) in
        [Lens::Descriptive, Lens::Predictive, Lens::DomainRelated].iter().zip(buckets.iter_mut())
    {
        if bucket.len() > MAX_PER_LENS {
            warnings.push(format!(
                "{} lens returned {} insights; kept the first {MAX_PER_LENS}",
                lens.key(),
                bucket.len()
            ));
            bucket.truncate(MAX_PER_LENS);
        }
    }
    let mut removed = 0usize;
    while buckets.iter().map(Vec::len).sum::<usize>() > MAX_TOTAL_INSIGHTS {
        // Shed from the largest bucket; ties resolve in declaration order, so
        // descriptive gives way first.
        let widest = (0..3).max_by_key(|&i| buckets[i].len()).unwrap();
        buckets[widest].pop();
        removed += 1;
    }
    if removed > 0 {
        warnings.push(format!(
            "dropped {removed} trailing insight(s) to keep the total within {MAX_TOTAL_INSIGHTS}"
        ));
    }
}

/// One structured generation per call. Hallucinated evidence references are
/// dropped with warnings; a lens emptied by that validation triggers one
/// repair exchange before [`InsightError::EmptyLens`].
pub fn generate_analysis(
    profile: &TableProfile,
    domain: &DomainFinding,
    concepts: &ConceptSet,
    memory: &ReflectionMemory,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<(InsightBundle, Vec<String>), InsightError> {
    let prompt = build_analysis_prompt(profile, domain, concepts, memory);
    let request = ChatRequest::new(
        &config.model_id,
        vec![
            ChatMessage::system(
                "You are a careful data analyst. You ground every claim in the \
                 dataset structure you are shown.",
            ),
            ChatMessage::user(prompt),
        ],
        config.temperatures.analysis,
    )
    .with_schema_tag(INSIGHT_BUNDLE_TAG);

    let mut warnings = Vec::new();
    let raw = gateway.complete_structured(&request, &BUNDLE_SCHEMA)?;
    let mut buckets = parse_buckets(&raw, profile, concepts, &mut warnings);

    let empty = empty_lenses(&buckets);
    if !empty.is_empty() {
        let problems = warnings.join("; ");
        let mut repair = request.clone();
        repair.messages.push(ChatMessage::assistant(
            serde_json::to_string(&raw).expect("raw value serializes"),
        ));
        repair.messages.push(ChatMessage::user(format!(
            "After validation the {} lens(es) had no usable insights ({problems}). \
             Provide at least one insight per lens, grounding every evidence reference \
             in the listed columns or concepts, as JSON in the same shape.",
            empty.join(", ")
        )));
        let raw = gateway.complete_structured(&repair, &BUNDLE_SCHEMA)?;
        buckets = parse_buckets(&raw, profile, concepts, &mut warnings);
        let still_empty = empty_lenses(&buckets);
        if !still_empty.is_empty() {
            return Err(InsightError::EmptyLens {
                lenses: still_empty.join(", "),
                details: warnings.join("; "),
            });
        }
        warnings.push("insight bundle accepted after one repair exchange".to_string());
    }

    enforce_bounds(&mut buckets, &mut warnings);
    let [descriptive, predictive, domain_related] = buckets;
    Ok((
        InsightBundle {
            iteration: memory.entries.len(),
            descriptive,
            predictive,
            domain_related,
        },
        warnings,
    ))
}
