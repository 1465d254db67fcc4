//! Functional-dependency and candidate-key discovery.
//!
//! Columns are dictionary-encoded to integer codes; nulls share a code per
//! column, so nulls compare equal to nulls (SQL-style NULL groups) in FD
//! checks. Key uniqueness instead *excludes* rows with nulls in the candidate
//! columns, and a key is only reported when at least [`KEY_NULL_FREE_MIN`] of
//! rows are null-free in those columns.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::infer::TypedValue;
use super::TypedTable;

pub const KEY_NULL_FREE_MIN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalDependency {
    /// One or two column names, in table column order.
    pub determinants: Vec<String>,
    pub dependent: String,
}

#[derive(Debug, Clone)]
pub struct DepConfig {
    /// Determinant / key sets are capped at this many columns.
    pub max_set_size: usize,
    /// Drop FDs whose determinant set equals a listed candidate key.
    pub prune_key_fds: bool,
}

impl Default for DepConfig {
    fn default() -> Self {
        DepConfig { max_set_size: 2, prune_key_fds: false }
    }
}

/// Per-column integer codes; equal values (and all nulls) share a code.
pub(crate) struct EncodedTable {
    pub names: Vec<String>,
    pub codes: Vec<Vec<u32>>,
    pub is_null: Vec<Vec<bool>>,
    pub row_count: usize,
}

#[derive(Hash, PartialEq, Eq)]
enum ValueKey<'a> {
    Null,
    Bool(bool),
    Int(i64),
    FloatBits(u64),
    Date(i64),
    Str(&'a str),
}

fn value_key(v: Option<&TypedValue>) -> ValueKey<'_> {
    match v {
        None => ValueKey::Null,
        Some(TypedValue::Bool(b)) => ValueKey::Bool(*b),
        Some(TypedValue::Int(i)) => ValueKey::Int(*i),
        Some(TypedValue::Float(f)) => ValueKey::FloatBits(f.to_bits()),
        Some(TypedValue::DateTime(dt)) => ValueKey::Date(dt.and_utc().timestamp_micros()),
        Some(TypedValue::Str(s)) => ValueKey::Str(s),
    }
}

pub(crate) fn encode(table: &TypedTable) -> EncodedTable {
    let mut codes = Vec::with_capacity(table.columns.len());
    let mut is_null = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let mut dict: HashMap<ValueKey<'_>, u32> = HashMap::new();
        let mut col_codes = Vec::with_capacity(col.values.len());
        let mut col_null = Vec::with_capacity(col.values.len());
        for v in &col.values {
            let next = dict.len() as u32;
            let code = *dict.entry(value_key(v.as_ref())).or_insert(next);
            col_codes.push(code);
            col_null.push(v.is_none());
        }
        codes.push(col_codes);
        is_null.push(col_null);
    }
    EncodedTable {
        names: table.columns.iter().map(|c| c.name.clone()).collect(),
        codes,
        is_null,
        row_count: table.row_count,
    }
}

fn fd_holds_single(det: &[u32], dep: &[u32]) -> bool {
    let mut map: HashMap<u32, u32> = HashMap::new();
    for (d, y) in det.iter().zip(dep) {
        match map.entry(*d) {
            std::collections::hash_map::Entry::Occupied(e) => {
                if e.get() != y {
                    return false;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(*y);
            }
        }
    }
    true
}

fn fd_holds_pair(a: &[u32], b: &[u32], dep: &[u32]) -> bool {
    let mut map: HashMap<u64, u32> = HashMap::new();
    for i in 0..dep.len() {
        let k = ((a[i] as u64) << 32) | b[i] as u64;
        match map.entry(k) {
            std::collections::hash_map::Entry::Occupied(e) => {
                if e.get() != &dep[i] {
                    return false;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(dep[i]);
            }
        }
    }
    true
}

/// Minimal FDs with determinant size ≤ `config.max_set_size` (1 or 2).
/// Output order: determinants by column index (singles first, then pairs
/// `(i, j)` with `i < j`), dependents by column index.
pub fn discover_fds(table: &TypedTable, config: &DepConfig) -> Vec<FunctionalDependency> {
    let enc = encode(table);
    discover_fds_encoded(&enc, config)
}

pub(crate) fn discover_fds_encoded(enc: &EncodedTable, config: &DepConfig) -> Vec<FunctionalDependency> {
    let ncols = enc.names.len();
    let mut single: Vec<Vec<bool>> = vec![vec![false; ncols]; ncols];
    let mut out = Vec::new();

    let pruned_keys: Vec<Vec<usize>> = if config.prune_key_fds {
        discover_key_indices(enc, config)
    } else {
        Vec::new()
    };
    let is_pruned = |det: &[usize]| pruned_keys.iter().any(|k| k.as_slice() == det);

    for d in 0..ncols {
        for y in 0..ncols {
            if d == y {
                continue;
            }
            if fd_holds_single(&enc.codes[d], &enc.codes[y]) {
                single[d][y] = true;
                if !is_pruned(&[d]) {
                    out.push(FunctionalDependency {
                        determinants: vec![enc.names[d].clone()],
                        dependent: enc.names[y].clone(),
                    });
                }
            }
        }
    }

    if config.max_set_size >= 2 {
        for a in 0..ncols {
            for b in (a + 1)..ncols {
                for y in 0..ncols {
                    if y == a || y == b {
                        continue;
                    }
                    // Minimality: a pair determinant only counts if neither
                    // single column already determines the dependent.
                    if single[a][y] || single[b][y] {
                        continue;
                    }
                    if fd_holds_pair(&enc.codes[a], &enc.codes[b], &enc.codes[y]) && !is_pruned(&[a, b]) {
                        out.push(FunctionalDependency {
                            determinants: vec![enc.names[a].clone(), enc.names[b].clone()],
                            dependent: enc.names[y].clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Minimal candidate keys of size ≤ `config.max_set_size`. Rows with a null in
/// a candidate column are excluded from the uniqueness check; the key is
/// reported only if ≥ 95% of rows are null-free in those columns.
pub fn discover_keys(table: &TypedTable, config: &DepConfig) -> Vec<Vec<String>> {
    let enc = encode(table);
    discover_key_indices(&enc, config)
        .into_iter()
        .map(|idxs| idxs.into_iter().map(|i| enc.names[i].clone()).collect())
        .collect()
}

pub(crate) fn discover_key_indices(enc: &EncodedTable, config: &DepConfig) -> Vec<Vec<usize>> {
    let ncols = enc.names.len();
    let rows = enc.row_count;
    let mut keys: Vec<Vec<usize>> = Vec::new();

    let frac_ok = |null_free: usize| rows > 0 && (null_free as f64) / (rows as f64) >= KEY_NULL_FREE_MIN;

    for c in 0..ncols {
        let mut seen: std::collections::HashSet<u32> = Default::default();
        let mut null_free = 0usize;
        let mut unique = true;
        for r in 0..rows {
            if enc.is_null[c][r] {
                continue;
            }
            null_free += 1;
            if !seen.insert(enc.codes[c][r]) {
                unique = false;
                break;
            }
        }
        if unique && frac_ok(null_free) {
            keys.push(vec![c]);
        }
    }

    if config.max_set_size >= 2 {
        let singles: std::collections::HashSet<usize> = keys.iter().map(|k| k[0]).collect();
        let single_key = |c: usize| singles.contains(&c);
        for a in 0..ncols {
            if single_key(a) {
                continue;
            }
            for b in (a + 1)..ncols {
                if single_key(b) {
                    continue;
                }
                let mut seen: std::collections::HashSet<u64> = Default::default();
                let mut null_free = 0usize;
                let mut unique = true;
                for r in 0..rows {
                    if enc.is_null[a][r] || enc.is_null[b][r] {
                        continue;
                    }
                    null_free += 1;
                    let k = ((enc.codes[a][r] as u64) << 32) | enc.codes[b][r] as u64;
                    if !seen.insert(k) {
                        unique = false;
                        break;
                    }
                }
                if unique && frac_ok(null_free) {
                    keys.push(vec![a, b]);
                }
            }
        }
        keys.sort();
    }
    keys
}
