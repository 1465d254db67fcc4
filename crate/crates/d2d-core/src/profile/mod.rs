//! Table profiling: type inference, column statistics, functional
//! dependencies, candidate keys, and an optional model-written narrative.

pub mod deps;
pub mod infer;
pub mod stats;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::table::RawTable;
pub use deps::{DepConfig, FunctionalDependency};
pub use infer::{InferredType, TypedColumn, TypedValue};
pub use stats::{ColumnProfile, NumericSummary};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

/// The raw table after trial-parse typing. Downstream stages (dependency
/// discovery, chart data preparation) operate on this.
#[derive(Debug, Clone)]
pub struct TypedTable {
    pub columns: Vec<TypedColumn>,
    pub row_count: usize,
}

impl TypedTable {
    pub fn column(&self, name: &str) -> Option<&TypedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn type_table(raw: &RawTable) -> TypedTable {
    let columns = raw
        .headers
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let cells = raw.column(i);
            infer::infer_column(name, &cells)
        })
        .collect();
    TypedTable { columns, row_count: raw.row_count() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetadata {
    /// Standard deviations use the population (divisor n) convention.
    pub std_dev_kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub schema_version: u32,
    pub row_count: usize,
    pub columns: Vec<ColumnProfile>,
    pub functional_dependencies: Vec<FunctionalDependency>,
    pub candidate_keys: Vec<Vec<String>>,
    /// Committed reading of the table, written by the narrative enrichment
    /// stage; absent until then.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narrative: Option<String>,
    pub metadata: ProfileMetadata,
}

impl TableProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Compact text block describing columns and structure, embedded in
    /// prompts. Line-oriented and stable.
    pub fn synopsis(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("Rows: {}\n", self.row_count));
        s.push_str("Columns:\n");
        for c in &self.columns {
            let mut line = format!("- {}: {}", c.name, c.inferred_type);
            if let Some(u) = &c.detected_unit {
                line.push_str(&format!(" (unit {u})"));
            }
            if let Some(ns) = &c.numeric_summary {
                line.push_str(&format!(
                    " [min {}, max {}, mean {:.4}, std {:.4}]",
                    infer::format_float(ns.min),
                    infer::format_float(ns.max),
                    ns.mean,
                    ns.std_dev
                ));
            }
            if let Some(tv) = &c.top_values {
                let head: Vec<String> =
                    tv.iter().take(5).map(|(v, n)| format!("{v} ({n})")).collect();
                if !head.is_empty() {
                    line.push_str(&format!(" [top: {}]", head.join(", ")));
                }
            }
            if c.null_count > 0 {
                line.push_str(&format!(" [{} null]", c.null_count));
            }
            s.push_str(&line);
            s.push('\n');
        }
        if !self.functional_dependencies.is_empty() {
            s.push_str("Functional dependencies:\n");
            for fd in &self.functional_dependencies {
                s.push_str(&format!("- {} -> {}\n", fd.determinants.join(", "), fd.dependent));
            }
        }
        if !self.candidate_keys.is_empty() {
            s.push_str("Candidate keys:\n");
            for k in &self.candidate_keys {
                s.push_str(&format!("- {}\n", k.join(", ")));
            }
        }
        if let Some(n) = &self.narrative {
            s.push_str(&format!("Reading: {n}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProfileConfig {
    pub deps: DepConfig,
}

/// Full deterministic profile of a typed table.
pub fn build_profile(table: &TypedTable, config: &ProfileConfig) -> TableProfile {
    let columns = table.columns.iter().map(stats::profile_column).collect();
    let candidate_keys = deps::discover_keys(table, &config.deps);
    let functional_dependencies = deps::discover_fds(table, &config.deps);
    TableProfile {
        schema_version: PROFILE_SCHEMA_VERSION,
        row_count: table.row_count,
        columns,
        functional_dependencies,
        candidate_keys,
        narrative: None,
        metadata: ProfileMetadata { std_dev_kind: "population".to_string() },
    }
}

pub const NARRATIVE_TAG: &str = "narrative";

/// The model must draft at least two competing readings, critique each, and
/// only then commit to one.
static NARRATIVE_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    json!({
        "type": "object",
        "required": ["candidate_readings", "final_reading"],
        "properties": {
            "candidate_readings": {
                "type": "array",
                "minItems": 2,
                "items": {
                    "type": "object",
                    "required": ["reading", "critique"],
                    "properties": {
                        "reading": {"type": "string", "minLength": 1},
                        "critique": {"type": "string", "minLength": 1}
                    },
                    "additionalProperties": false
                }
            },
            "final_reading": {"type": "string", "minLength": 1}
        },
        "additionalProperties": false
    })
});

/// Narrative enrichment: asks the model what the table *is* (grain, entity,
/// likely collection process) and stores the committed reading on the
/// profile. Structured-output failure leaves the profile unchanged and
/// returns a warning — the pipeline can run without a narrative.
pub fn enrich_profile(
    profile: &mut TableProfile,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<Vec<String>, GatewayError> {
    let prompt = format!(
        "A dataset has the following structure:\n\n{}\n\
         What is this table? Draft at least two competing readings of what one row \
         represents and how the data was likely collected, critique each reading \
         against the evidence above, then commit to one. Reply with JSON: \
         {{\"candidate_readings\": [{{\"reading\": \"...\", \"critique\": \"...\"}}], \
         \"final_reading\": \"...\"}}",
        profile.synopsis()
    );
    let request = ChatRequest::new(
        &config.model_id,
        vec![
            ChatMessage::system("You interpret tabular datasets cautiously, from evidence."),
            ChatMessage::user(prompt),
        ],
        config.temperatures.narrative,
    )
    .with_schema_tag(NARRATIVE_TAG);

    match gateway.complete_structured(&request, &NARRATIVE_SCHEMA) {
        Ok(value) => {
            let reading = value["final_reading"].as_str().unwrap_or_default().trim().to_string();
            if reading.is_empty() {
                return Ok(vec!["narrative stage returned an empty final reading; skipped".into()]);
            }
            profile.narrative = Some(reading);
            Ok(Vec::new())
        }
        Err(GatewayError::Structured(e)) => {
            Ok(vec![format!("narrative stage skipped after {} structured attempts: {}", e.attempts, e)])
        }
        Err(other) => Err(other),
    }
}
