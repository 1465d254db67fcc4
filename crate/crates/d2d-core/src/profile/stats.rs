//! Per-column summary statistics over typed values.

use serde::{Deserialize, Serialize};

use super::infer::{InferredType, TypedColumn, TypedValue};

pub const MAX_TOP_VALUES: usize = 10;

/// Present only for integer/decimal columns. `std_dev` is the population
/// standard deviation (divisor n), stated as such in the profile metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub inferred_type: InferredType,
    pub null_count: usize,
    pub distinct_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected_unit: Option<String>,
    /// `(value, frequency)` sorted by frequency desc, ties lexicographic asc.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_values: Option<Vec<(String, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_summary: Option<NumericSummary>,
}

pub fn profile_column(col: &TypedColumn) -> ColumnProfile {
    let null_count = col.values.iter().filter(|v| v.is_none()).count();

    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    for v in col.values.iter().flatten() {
        *counts.entry(v.display()).or_insert(0) += 1;
    }
    let distinct_count = counts.len();

    let numeric_summary = match col.inferred_type {
        InferredType::Integer | InferredType::Decimal => {
            let vals: Vec<f64> = col
                .values
                .iter()
                .flatten()
                .filter_map(TypedValue::as_f64)
                .collect();
            numeric_summary(&vals)
        }
        _ => None,
    };

    let top_values = match col.inferred_type {
        InferredType::Boolean | InferredType::Categorical | InferredType::Text => {
            let mut pairs: Vec<(String, usize)> = counts.into_iter().collect();
            // BTreeMap iteration is already lexicographic; a stable sort by
            // descending count keeps that order within ties.
            pairs.sort_by(|a, b| b.1.cmp(&a.1));
            pairs.truncate(MAX_TOP_VALUES);
            Some(pairs)
        }
        _ => None,
    };

    ColumnProfile {
        name: col.name.clone(),
        inferred_type: col.inferred_type,
        null_count,
        distinct_count,
        detected_unit: col.detected_unit.clone(),
        top_values,
        numeric_summary,
    }
}

fn numeric_summary(vals: &[f64]) -> Option<NumericSummary> {
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(NumericSummary { min, max, mean, std_dev: var.sqrt() })
}
