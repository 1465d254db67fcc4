//! Chart data preparation: projects the typed table onto a plan's encoding
//! columns and, when the plan aggregates, computes the group-by result
//! deterministically so the emitted grammar docs inline plain values.

use std::collections::BTreeMap;

use rand::SeedableRng;
use serde_json::{json, Value};

use crate::chart::{Aggregate, ChartPlan, ChartType};
use crate::profile::infer::format_datetime;
use crate::profile::{TypedColumn, TypedTable, TypedValue};

/// Inline row cap; beyond it rows are uniformly sampled with the run seed.
pub const MAX_INLINE_ROWS: usize = 5000;

/// Placeholder group for nulls in grouping columns.
pub const NULL_GROUP: &str = "(null)";

#[derive(Debug, Clone, thiserror::Error)]
pub enum AggregationError {
    #[error("encoding references unknown column {0:?}")]
    UnknownColumn(String),
    #[error("aggregate {aggregate} needs a measure column")]
    MissingMeasure { aggregate: String },
    #[error("aggregate {aggregate} over non-numeric column {column:?} ({inferred_type})")]
    NonNumericMeasure { aggregate: String, column: String, inferred_type: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    /// JSON objects keyed by column name (plus the aggregate field).
    pub rows: Vec<Value>,
    /// True when the row cap forced uniform sampling.
    pub sampled: bool,
}

/// Channel holding the aggregated measure: heatmaps color by the measure,
/// everything else puts it on y.
pub fn measure_field(plan: &ChartPlan) -> Option<&str> {
    match plan.aggregate {
        None | Some(Aggregate::Count) => None,
        Some(_) if plan.chart_type == ChartType::Heatmap => plan.encodings.color.as_deref(),
        Some(_) => plan.encodings.y.as_deref(),
    }
}

/// Name of the output field carrying the aggregated value.
pub fn value_field(plan: &ChartPlan) -> Option<String> {
    match plan.aggregate {
        None => None,
        Some(Aggregate::Count) => Some("count".to_string()),
        Some(_) => measure_field(plan).map(String::from),
    }
}

fn json_cell(v: &Option<TypedValue>) -> Value {
    match v {
        None => Value::Null,
        Some(TypedValue::Bool(b)) => json!(b),
        Some(TypedValue::Int(i)) => json!(i),
        Some(TypedValue::Float(f)) => {
            serde_json::Number::from_f64(*f).map(Value::Number).unwrap_or(Value::Null)
        }
        Some(TypedValue::DateTime(dt)) => json!(format_datetime(dt)),
        Some(TypedValue::Str(s)) => json!(s),
    }
}

fn group_cell(v: &Option<TypedValue>) -> Value {
    match v {
        None => json!(NULL_GROUP),
        some => json_cell(some),
    }
}

fn group_key(v: &Option<TypedValue>) -> String {
    v.as_ref().map(TypedValue::display).unwrap_or_else(|| NULL_GROUP.to_string())
}

fn resolve<'t>(
    table: &'t TypedTable,
    name: &str,
) -> Result<&'t TypedColumn, AggregationError> {
    table.column(name).ok_or_else(|| AggregationError::UnknownColumn(name.to_string()))
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in typed values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Aggregated measure for one group; `None` when every measure cell in the
/// group is null. Count never reaches here — it has no measure column.
fn aggregate_group(agg: Aggregate, column: &TypedColumn, indices: &[usize]) -> Option<Value> {
    let values: Vec<&TypedValue> =
        indices.iter().filter_map(|&i| column.values[i].as_ref()).collect();
    if values.is_empty() {
        return None;
    }
    match agg {
        Aggregate::Count => unreachable!("count has no measure column"),
        // Integer sums stay integers — exact and cleaner JSON.
        Aggregate::Sum => {
            if values.iter().all(|v| matches!(v, TypedValue::Int(_))) {
                let sum: i64 = values
                    .iter()
                    .map(|v| match v {
                        TypedValue::Int(i) => *i,
                        _ => unreachable!(),
                    })
                    .sum();
                Some(json!(sum))
            } else {
                let sum: f64 = values.iter().filter_map(|v| v.as_f64()).sum();
                serde_json::Number::from_f64(sum).map(Value::Number)
            }
        }
        Aggregate::Mean => {
            let nums: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
            let mean = nums.iter().sum::<f64>() / nums.len() as f64;
            serde_json::Number::from_f64(mean).map(Value::Number)
        }
        Aggregate::Median => {
            let mut nums: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
            serde_json::Number::from_f64(median(&mut nums)).map(Value::Number)
        }
    }
}

/// Uniform order-preserving sample down to [`MAX_INLINE_ROWS`].
fn sample_rows(rows: Vec<Value>, seed: u64) -> (Vec<Value>, bool) {
    if rows.len() <= MAX_INLINE_ROWS {
        return (rows, false);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, rows.len(), MAX_INLINE_ROWS).into_vec();
    keep.sort_unstable();
    let mut keep_iter = keep.into_iter().peekable();
    let sampled = rows
        .into_iter()
        .enumerate()
        .filter(|(i, _)| {
            if keep_iter.peek() == Some(i) {
                keep_iter.next();
                true
            } else {
                false
            }
        })
        .map(|(_, r)| r)
        .collect();
    (sampled, true)
}

/// Rows the grammar doc will inline: a straight projection when the plan has
/// no aggregate, otherwise a group-by over every non-measure encoding with the
/// aggregate applied per group. Groups are ordered lexicographically by their
/// display keys; nulls in grouping columns collapse into a [`NULL_GROUP`] row.
pub fn prepare_chart_data(
    table: &TypedTable,
    plan: &ChartPlan,
    seed: u64,
) -> Result<PreparedData, AggregationError> {
    let Some(agg) = plan.aggregate else {
        let columns: Vec<&TypedColumn> = plan
            .encodings
            .columns()
            .iter()
            .map(|n| resolve(table, n))
            .collect::<Result<_, _>>()?;
        let rows = (0..table.row_count)
            .map(|i| {
                let mut obj = serde_json::Map::new();
                for col in &columns {
                    obj.insert(col.name.clone(), json_cell(&col.values[i]));
                }
                Value::Object(obj)
            })
            .collect();
        let (rows, sampled) = sample_rows(rows, seed);
        return Ok(PreparedData { rows, sampled });
    };

    let measure_col = match measure_field(plan) {
        Some(name) => {
            let col = resolve(table, name)?;
            if !matches!(
                col.inferred_type,
                crate::profile::InferredType::Integer | crate::profile::InferredType::Decimal
            ) {
                return Err(AggregationError::NonNumericMeasure {
                    aggregate: agg.key().to_string(),
                    column: col.name.clone(),
                    inferred_type: col.inferred_type.to_string(),
                });
            }
            Some(col)
        }
        None if agg != Aggregate::Count => {
            return Err(AggregationError::MissingMeasure { aggregate: agg.key().to_string() })
        }
        None => None,
    };

    let group_cols: Vec<&TypedColumn> = plan
        .encodings
        .columns()
        .iter()
        .filter(|n| Some(**n) != measure_field(plan))
        .map(|n| resolve(table, n))
        .collect::<Result<_, _>>()?;

    let mut groups: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for i in 0..table.row_count {
        let key = group_cols.iter().map(|c| group_key(&c.values[i])).collect();
        groups.entry(key).or_default().push(i);
    }

    let out_field = value_field(plan).expect("aggregate present");
    let mut rows = Vec::with_capacity(groups.len());
    for indices in groups.values() {
        let mut obj = serde_json::Map::new();
        for col in &group_cols {
            obj.insert(col.name.clone(), group_cell(&col.values[indices[0]]));
        }
        let value = match measure_col {
            Some(col) => aggregate_group(agg, col, indices).unwrap_or(Value::Null),
            None => json!(indices.len()),
        };
        obj.insert(out_field.clone(), value);
        rows.push(Value::Object(obj));
    }
    let (rows, sampled) = sample_rows(rows, seed);
    Ok(PreparedData { rows, sampled })
}
