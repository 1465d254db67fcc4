//! Domain detection and concept extraction.
//!
//! Domain detection is a two-turn exchange: the model proposes lookup terms,
//! the knowledge source is consulted offline, and the model commits to a
//! domain grounded in whatever snippets were found. Concept extraction
//! validates every column reference against the profile and runs one semantic
//! repair exchange before giving up.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::knowledge::KnowledgeSource;
use crate::profile::TableProfile;

pub const MAX_DOMAIN_SNIPPETS: usize = 3;
pub const MIN_CONCEPTS: usize = 3;
pub const MAX_CONCEPTS: usize = 12;

pub const TERM_PROPOSAL_TAG: &str = "term_proposal";
pub const DOMAIN_FINDING_TAG: &str = "domain_finding";
pub const CONCEPT_SET_TAG: &str = "concept_set";

#[derive(Debug, Clone, thiserror::Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("only {valid} valid concepts after repair (need at least {MIN_CONCEPTS}): {details}")]
    ConceptValidation { valid: usize, details: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeSnippet {
    pub term: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFinding {
    /// One to six words.
    pub label: String,
    /// Exactly one sentence.
    pub definition: String,
    pub rationale: String,
    pub knowledge_snippets_used: Vec<KnowledgeSnippet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub phrase: String,
    /// Profile columns this concept is grounded in; never empty.
    pub linked_columns: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSet {
    pub concepts: Vec<Concept>,
}

static TERM_PROPOSAL_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    json!({
        "type": "object",
        "required": ["terms"],
        "properties": {
            "terms": {
                "type": "array",
                "minItems": 1,
                "maxItems": 5,
                "items": {"type": "string", "minLength": 1}
            }
        },
        "additionalProperties": false
    })
});

/// Label: 1–6 whitespace-separated words. Definition: exactly one sentence —
/// one terminal punctuation mark, at the end.
static DOMAIN_FINDING_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    json!({
        "type": "object",
        "required": ["label", "definition", "rationale"],
        "properties": {
            "label": {"type": "string", "pattern": "^\\S+(\\s\\S+){0,5}$"},
            "definition": {"type": "string", "pattern": "^[^.!?]+[.!?]$"},
            "rationale": {"type": "string", "minLength": 1}
        },
        "additionalProperties": false
    })
});

static CONCEPT_SET_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    json!({
        "type": "object",
        "required": ["concepts"],
        "properties": {
            "concepts": {
                "type": "array",
                "minItems": MIN_CONCEPTS,
                "maxItems": MAX_CONCEPTS,
                "items": {
                    "type": "object",
                    "required": ["phrase", "linked_columns", "rationale"],
                    "properties": {
                        "phrase": {"type": "string", "minLength": 1},
                        "linked_columns": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "string", "minLength": 1}
                        },
                        "rationale": {"type": "string", "minLength": 1}
                    },
                    "additionalProperties": false
                }
            }
        },
        "additionalProperties": false
    })
});

const DOMAIN_SYSTEM: &str = "You identify the business domain of tabular datasets. \
You are precise and commit to a single domain.";

/// Two-turn domain detection: term proposal → knowledge lookup → grounded
/// final answer. Exactly two gateway calls plus any schema repairs.
pub fn detect_domain(
    profile: &TableProfile,
    knowledge: &dyn KnowledgeSource,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<DomainFinding, SemanticsError> {
    let synopsis = profile.synopsis();

    let proposal_prompt = format!(
        "A dataset has the following structure:\n\n{synopsis}\n\
         Before naming the domain, propose up to 5 short terms to look up in a \
         reference glossary. Reply with JSON: {{\"terms\": [\"...\"]}}"
    );
    let proposal_req = ChatRequest::new(
        &config.model_id,
        vec![ChatMessage::system(DOMAIN_SYSTEM), ChatMessage::user(proposal_prompt)],
        config.temperatures.domain,
    )
    .with_schema_tag(TERM_PROPOSAL_TAG);
    let proposal = gateway.complete_structured(&proposal_req, &TERM_PROPOSAL_SCHEMA)?;

    let mut snippets: Vec<KnowledgeSnippet> = Vec::new();
    if let Some(terms) = proposal["terms"].as_array() {
        for t in terms {
            if snippets.len() >= MAX_DOMAIN_SNIPPETS {
                break;
            }
            let term = t.as_str().unwrap_or_default().trim();
            if term.is_empty() {
                continue;
            }
            if let Some(snippet) = knowledge.lookup(term) {
                snippets.push(KnowledgeSnippet { term: term.to_string(), snippet });
            }
        }
    }

    let reference_block = if snippets.is_empty() {
        "No reference material was found for the proposed terms.".to_string()
    } else {
        let lines: Vec<String> = snippets
            .iter()
            .map(|s| format!("- {}: {}", s.term, s.snippet))
            .collect();
        format!("Reference snippets:\n{}", lines.join("\n"))
    };

    let finding_prompt = format!(
        "A dataset has the following structure:\n\n{synopsis}\n{reference_block}\n\n\
         Commit to the dataset's domain. Reply with JSON: \
         {{\"label\": \"1-6 words\", \"definition\": \"exactly one sentence ending \
         in a period\", \"rationale\": \"why this domain fits\"}}"
    );
    let finding_req = ChatRequest::new(
        &config.model_id,
        vec![ChatMessage::system(DOMAIN_SYSTEM), ChatMessage::user(finding_prompt)],
        config.temperatures.domain,
    )
    .with_schema_tag(DOMAIN_FINDING_TAG);
    let finding = gateway.complete_structured(&finding_req, &DOMAIN_FINDING_SCHEMA)?;

    Ok(DomainFinding {
        label: finding["label"].as_str().unwrap_or_default().to_string(),
        definition: finding["definition"].as_str().unwrap_or_default().to_string(),
        rationale: finding["rationale"].as_str().unwrap_or_default().to_string(),
        knowledge_snippets_used: snippets,
    })
}

/// Validation outcome for one raw concept list: surviving concepts + warnings.
fn validate_concepts(
    raw: &serde_json::Value,
    profile: &TableProfile,
    warnings: &mut Vec<String>,
) -> Vec<Concept> {
    let mut seen_phrases: Vec<String> = Vec::new();
    let mut out = Vec::new();
    let Some(items) = raw["concepts"].as_array() else {
        return out;
    };
    for item in items {
        let phrase = item["phrase"].as_str().unwrap_or_default().trim().to_string();
        let lower = phrase.to_lowercase();
        if seen_phrases.contains(&lower) {
            warnings.push(format!("dropped duplicate concept phrase {phrase:?}"));
            continue;
        }
        let mut linked = Vec::new();
        for c in item["linked_columns"].as_array().into_iter().flatten() {
            let name = c.as_str().unwrap_or_default().trim();
            // Case-insensitive resolution, canonicalized to the profile's
            // spelling.
            match profile
                .columns
                .iter()
                .find(|pc| pc.name.eq_ignore_ascii_case(name))
            {
                Some(pc) => {
                    if !linked.contains(&pc.name) {
                        linked.push(pc.name.clone());
                    }
                }
                None => warnings.push(format!(
                    "concept {phrase:?} references unknown column {name:?}; reference dropped"
                )),
            }
        }
        if linked.is_empty() {
            warnings.push(format!("dropped concept {phrase:?}: no valid linked columns"));
            continue;
        }
        seen_phrases.push(lower);
        out.push(Concept {
            phrase,
            linked_columns: linked,
            rationale: item["rationale"].as_str().unwrap_or_default().to_string(),
        });
    }
    out
}

/// Extracts 3–12 concepts grounded in profile columns. Invalid column
/// references are dropped with warnings; if fewer than 3 concepts survive,
/// one semantic repair exchange runs before [`SemanticsError::ConceptValidation`].
pub fn extract_concepts(
    profile: &TableProfile,
    domain: &DomainFinding,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<(ConceptSet, Vec<String>), SemanticsError> {
    let synopsis = profile.synopsis();
    let prompt = format!(
        "A dataset in the domain \"{}\" ({}) has the following structure:\n\n{synopsis}\n\
         Identify between {MIN_CONCEPTS} and {MAX_CONCEPTS} analysis concepts for this dataset. \
         Each concept needs a short phrase, the exact column names it is grounded in \
         (from the list above), and a one-line rationale. Reply with JSON: \
         {{\"concepts\": [{{\"phrase\": \"...\", \"linked_columns\": [\"...\"], \"rationale\": \"...\"}}]}}",
        domain.label, domain.definition
    );
    let request = ChatRequest::new(
        &config.model_id,
        vec![
            ChatMessage::system("You design analysis plans for tabular datasets."),
            ChatMessage::user(prompt),
        ],
        config.temperatures.concepts,
    )
    .with_schema_tag(CONCEPT_SET_TAG);

    let mut warnings = Vec::new();
    let raw = gateway.complete_structured(&request, &CONCEPT_SET_SCHEMA)?;
    let concepts = validate_concepts(&raw, profile, &mut warnings);
    if concepts.len() >= MIN_CONCEPTS {
        return Ok((ConceptSet { concepts }, warnings));
    }

    // Semantic repair: the JSON was schema-valid but too few concepts were
    // grounded in real columns.
    let problems = warnings.join("; ");
    let mut repair = request.clone();
    repair
        .messages
        .push(ChatMessage::assistant(serde_json::to_string(&raw).expect("raw value serializes")));
    repair.messages.push(ChatMessage::user(format!(
        "After validation only {} of those concepts referenced real columns ({problems}). \
         Provide at least {MIN_CONCEPTS} concepts whose linked_columns all come from the \
         column list, as JSON in the same shape.",
        concepts.len()
    )));
    let raw = gateway.complete_structured(&repair, &CONCEPT_SET_SCHEMA)?;
    let mut repair_warnings = Vec::new();
    let concepts = validate_concepts(&raw, profile, &mut repair_warnings);
    warnings.extend(repair_warnings);
    if concepts.len() >= MIN_CONCEPTS {
        warnings.push("concept set accepted after one repair exchange".to_string());
        return Ok((ConceptSet { concepts }, warnings));
    }
    Err(SemanticsError::ConceptValidation { valid: concepts.len(), details: warnings.join("; ") })
}
