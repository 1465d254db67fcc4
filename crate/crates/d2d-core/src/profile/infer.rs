//! Column type inference by trial parsing.
//!
//! Cascade order: boolean → integer → decimal → datetime → categorical → text.
//! A parse level is accepted when at least [`PARSE_ACCEPT_FRACTION`] of the
//! non-null cells parse; cells that fail under an accepted level are coerced
//! to null. Boolean is stricter: the full distinct token set must be boolean
//! and have at most two members.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::table::RawCell;

/// Minimum fraction of non-null cells that must parse for a cascade level.
pub const PARSE_ACCEPT_FRACTION: f64 = 0.98;

/// A leading/trailing unit token must appear on at least this fraction of
/// non-null cells to be reported as the column's unit.
pub const UNIT_ACCEPT_FRACTION: f64 = 0.90;

/// Distinct-value ceiling for the categorical level: `max(20, 5% of rows)`.
pub fn categorical_distinct_ceiling(row_count: usize) -> usize {
    20usize.max((row_count as f64 * 0.05).floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferredType {
    Boolean,
    Integer,
    Decimal,
    Datetime,
    Categorical,
    Text,
}

impl std::fmt::Display for InferredType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InferredType::Boolean => "boolean",
            InferredType::Integer => "integer",
            InferredType::Decimal => "decimal",
            InferredType::Datetime => "datetime",
            InferredType::Categorical => "categorical",
            InferredType::Text => "text",
        };
        f.write_str(s)
    }
}

/// A parsed cell value. Categorical and text cells both carry strings; the
/// distinction lives on the column.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    DateTime(NaiveDateTime),
    Str(String),
}

impl TypedValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            TypedValue::Int(i) => Some(*i as f64),
            TypedValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// Stable display form used for grouping keys and top-value lists.
    pub fn display(&self) -> String {
        match self {
            TypedValue::Bool(b) => b.to_string(),
            TypedValue::Int(i) => i.to_string(),
            TypedValue::Float(f) => format_float(*f),
            TypedValue::DateTime(dt) => format_datetime(dt),
            TypedValue::Str(s) => s.clone(),
        }
    }
}

/// Shortest-roundtrip float formatting (serde_json's behavior) so displays are
/// deterministic across platforms.
pub fn format_float(f: f64) -> String {
    let mut buf = ryu_like(f);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_like(f: f64) -> String {
    // serde_json uses ryu internally; going through serde_json keeps the cell
    // display identical to the JSON the renderer inlines.
    serde_json::Number::from_f64(f)
        .map(|n| n.to_string())
        .unwrap_or_else(|| "null".to_string())
}

/// Date-only values render as `YYYY-MM-DD`; anything with a time-of-day keeps
/// the full ISO form.
pub fn format_datetime(dt: &NaiveDateTime) -> String {
    if dt.time() == chrono::NaiveTime::MIN {
        dt.format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

#[derive(Debug, Clone)]
pub struct TypedColumn {
    pub name: String,
    pub inferred_type: InferredType,
    pub values: Vec<Option<TypedValue>>,
    pub detected_unit: Option<String>,
    /// Cells that failed to parse under the accepted level and became null.
    pub coerced_null_count: usize,
}

const BOOL_TRUE: [&str; 3] = ["true", "yes", "1"];
const BOOL_FALSE: [&str; 3] = ["false", "no", "0"];

fn parse_bool_token(t: &str) -> Option<bool> {
    let low = t.trim().to_ascii_lowercase();
    if BOOL_TRUE.contains(&low.as_str()) {
        Some(true)
    } else if BOOL_FALSE.contains(&low.as_str()) {
        Some(false)
    } else {
        None
    }
}

fn parse_integer(t: &str) -> Option<i64> {
    let t = t.trim();
    let stripped = t.strip_prefix(['+', '-']).unwrap_or(t);
    if stripped.is_empty() || !stripped.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse::<i64>().ok()
}

/// A unit is a single short token, either symbolic (`$`, `%`, `€`) or a word
/// separated from the number by whitespace (`12 kg`). This keeps identifiers
/// like `cat_7` from parsing as unit-plus-number.
fn unit_token_ok(token: &str, ws_separated: bool) -> bool {
    if token.chars().count() > 6 || token.chars().any(char::is_whitespace) {
        return false;
    }
    let symbolic = token.chars().all(|c| !c.is_alphanumeric() && c != '_');
    symbolic || (ws_separated && !token.contains('_'))
}

/// Splits a cell into (leading unit, numeric core, trailing unit). At most one
/// of the unit slots may be non-empty.
fn split_unit(t: &str) -> Option<(Option<&str>, &str, Option<&str>)> {
    let t = t.trim();
    let is_core_byte = |b: u8| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b',');
    let start = t.bytes().position(is_core_byte)?;
    let end = t.len() - t.bytes().rev().position(is_core_byte).unwrap();
    let raw_lead = &t[..start];
    let core = &t[start..end];
    let raw_trail = &t[end..];
    let lead = raw_lead.trim();
    let trail = raw_trail.trim();
    if !lead.is_empty() && !trail.is_empty() {
        return None; // a unit may lead or trail, not both
    }
    if !lead.is_empty() && !unit_token_ok(lead, raw_lead.ends_with(char::is_whitespace)) {
        return None;
    }
    if !trail.is_empty() && !unit_token_ok(trail, raw_trail.starts_with(char::is_whitespace)) {
        return None;
    }
    Some((
        if lead.is_empty() { None } else { Some(lead) },
        core,
        if trail.is_empty() { None } else { Some(trail) },
    ))
}

/// Numeric core with optional sign, optional comma thousands groups, optional
/// fraction. Comma groups must be well-formed (`1,234,567.5`).
fn parse_numeric_core(core: &str) -> Option<f64> {
    let body = core.strip_prefix(['+', '-']).unwrap_or(core);
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if let Some(f) = frac_part {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    if int_part.contains(',') {
        let groups: Vec<&str> = int_part.split(',').collect();
        if groups[0].is_empty() || groups[0].len() > 3 {
            return None;
        }
        if !groups[0].bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        for g in &groups[1..] {
            if g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
        }
    } else if !int_part.bytes().all(|b| b.is_ascii_digit()) || int_part.is_empty() {
        return None;
    }
    core.replace(',', "").parse::<f64>().ok()
}

/// Decimal parse tolerating thousands separators and a single unit token.
/// Returns the value and the unit token if one was present.
fn parse_decimal(t: &str) -> Option<(f64, Option<String>)> {
    let (lead, core, trail) = split_unit(t)?;
    let value = parse_numeric_core(core)?;
    let unit = lead.or(trail).map(|s| s.to_string());
    Some((value, unit))
}

const DATETIME_FORMATS: [&str; 5] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%SZ",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S%.fZ",
];

const DATE_FORMATS: [&str; 6] = [
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%d/%m/%Y",
    "%m/%d/%Y",
    "%d-%m-%Y",
    "%d.%m.%Y",
];

fn parse_datetime(t: &str) -> Option<NaiveDateTime> {
    let t = t.trim();
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt);
        }
    }
    for fmt in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(t, fmt) {
            return Some(d.and_time(chrono::NaiveTime::MIN));
        }
    }
    None
}

/// Runs the cascade over one column of raw cells.
pub fn infer_column(name: &str, cells: &[&RawCell]) -> TypedColumn {
    let non_null: Vec<&str> = cells
        .iter()
        .filter(|c| !c.is_null)
        .map(|c| c.text.trim())
        .collect();
    let n = non_null.len();

    if n == 0 {
        // An all-null column carries no evidence; treat it as text.
        return TypedColumn {
            name: name.to_string(),
            inferred_type: InferredType::Text,
            values: cells.iter().map(|_| None).collect(),
            detected_unit: None,
            coerced_null_count: 0,
        };
    }

    let accept = |parsed: usize| (parsed as f64) / (n as f64) >= PARSE_ACCEPT_FRACTION;

    // Boolean: every non-null cell must be a boolean token and the distinct
    // token set must have at most two members.
    {
        let mut distinct: Vec<String> = Vec::new();
        let all_bool = non_null.iter().all(|t| {
            let low = t.to_ascii_lowercase();
            if parse_bool_token(&low).is_some() {
                if !distinct.contains(&low) {
                    distinct.push(low);
                }
                true
            } else {
                false
            }
        });
        if all_bool && distinct.len() <= 2 {
            return finish(name, cells, InferredType::Boolean, None, |t| {
                parse_bool_token(t).map(TypedValue::Bool)
            });
        }
    }

    if accept(non_null.iter().filter(|t| parse_integer(t).is_some()).count()) {
        return finish(name, cells, InferredType::Integer, None, |t| {
            parse_integer(t).map(TypedValue::Int)
        });
    }

    {
        let mut parsed = 0usize;
        let mut unit_counts: std::collections::BTreeMap<String, usize> = Default::default();
        for t in &non_null {
            if let Some((_, unit)) = parse_decimal(t) {
                parsed += 1;
                if let Some(u) = unit {
                    *unit_counts.entry(u).or_insert(0) += 1;
                }
            }
        }
        if accept(parsed) {
            let detected_unit = unit_counts
                .into_iter()
                .find(|(_, c)| (*c as f64) / (n as f64) >= UNIT_ACCEPT_FRACTION)
                .map(|(u, _)| u);
            return finish(name, cells, InferredType::Decimal, detected_unit, |t| {
                parse_decimal(t).map(|(v, _)| TypedValue::Float(v))
            });
        }
    }

    if accept(non_null.iter().filter(|t| parse_datetime(t).is_some()).count()) {
        return finish(name, cells, InferredType::Datetime, None, |t| {
            parse_datetime(t).map(TypedValue::DateTime)
        });
    }

    {
        let mut distinct: std::collections::BTreeSet<&str> = Default::default();
        for t in &non_null {
            distinct.insert(t);
        }
        if distinct.len() <= categorical_distinct_ceiling(cells.len()) {
            return finish(name, cells, InferredType::Categorical, None, |t| {
                Some(TypedValue::Str(t.to_string()))
            });
        }
    }

    finish(name, cells, InferredType::Text, None, |t| {
        Some(TypedValue::Str(t.to_string()))
    })
}

fn finish(
    name: &str,
    cells: &[&RawCell],
    inferred_type: InferredType,
    detected_unit: Option<String>,
    parse: impl Fn(&str) -> Option<TypedValue>,
) -> TypedColumn {
    let mut coerced = 0usize;
    let values = cells
        .iter()
        .map(|c| {
            if c.is_null {
                None
            } else {
                let v = parse(c.text.trim());
                if v.is_none() {
                    coerced += 1;
                }
                v
            }
        })
        .collect();
    TypedColumn {
        name: name.to_string(),
        inferred_type,
        values,
        detected_unit,
        coerced_null_count: coerced,
    }
}
