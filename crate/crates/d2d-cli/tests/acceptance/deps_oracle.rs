//! Dependency and key discovery must agree, as sets, with a brute-force
//! oracle that applies the definitions directly: an FD holds when every row
//! pair agreeing on the determinants agrees on the dependent (nulls compare
//! equal); a key is unique over its null-free rows and at least 95% of rows
//! must be null-free in the key columns.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use d2d_core::profile::deps::{discover_fds, discover_keys, DepConfig, KEY_NULL_FREE_MIN};
use d2d_core::profile::{TypedTable, TypedValue};

/// Owned cell identity mirroring the library's value-equality contract
/// (float bit equality, datetime at microsecond precision, null == null).
#[derive(Clone, PartialEq, Eq, Hash)]
enum CellKey {
    Null,
    Bool(bool),
    Int(i64),
    FloatBits(u64),
    Date(i64),
    Str(String),
}

fn cell_key(v: &Option<TypedValue>) -> CellKey {
    match v {
        None => CellKey::Null,
        Some(TypedValue::Bool(b)) => CellKey::Bool(*b),
        Some(TypedValue::Int(i)) => CellKey::Int(*i),
        Some(TypedValue::Float(f)) => CellKey::FloatBits(f.to_bits()),
        Some(TypedValue::DateTime(dt)) => CellKey::Date(dt.and_utc().timestamp_micros()),
        Some(TypedValue::Str(s)) => CellKey::Str(s.clone()),
    }
}

struct OracleInput {
    names: Vec<String>,
    cells: Vec<Vec<CellKey>>, // column-major
    nulls: Vec<Vec<bool>>,
    rows: usize,
}

fn oracle_input(table: &TypedTable) -> OracleInput {
    OracleInput {
        names: table.columns.iter().map(|c| c.name.clone()).collect(),
        cells: table
            .columns
            .iter()
            .map(|c| c.values.iter().map(cell_key).collect())
            .collect(),
        nulls: table
            .columns
            .iter()
            .map(|c| c.values.iter().map(Option::is_none).collect())
            .collect(),
        rows: table.row_count,
    }
}

/// Pairwise definition check with early exit.
fn fd_holds(input: &OracleInput, det: &[usize], dep: usize) -> bool {
    for r in 0..input.rows {
        for s in (r + 1)..input.rows {
            let agree = det.iter().all(|&d| input.cells[d][r] == input.cells[d][s]);
            if agree && input.cells[dep][r] != input.cells[dep][s] {
                return false;
            }
        }
    }
    true
}

/// (determinant names, dependent name) set per the minimality rule: a pair
/// determinant counts only when neither member determines the dependent
/// alone.
fn oracle_fds(input: &OracleInput) -> BTreeSet<(Vec<String>, String)> {
    let n = input.names.len();
    let mut single = vec![vec![false; n]; n];
    let mut out = BTreeSet::new();
    for d in 0..n {
        for y in 0..n {
            if d != y && fd_holds(input, &[d], y) {
                single[d][y] = true;
                out.insert((vec![input.names[d].clone()], input.names[y].clone()));
            }
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            for y in 0..n {
                if y == a || y == b || single[a][y] || single[b][y] {
                    continue;
                }
                if fd_holds(input, &[a, b], y) {
                    out.insert((
                        vec![input.names[a].clone(), input.names[b].clone()],
                        input.names[y].clone(),
                    ));
                }
            }
        }
    }
    out
}

/// Uniqueness over null-free rows, via sort-and-compare rather than hashing.
fn unique_and_covered(input: &OracleInput, cols: &[usize]) -> bool {
    let mut tuples: Vec<Vec<&CellKey>> = Vec::new();
    for r in 0..input.rows {
        if cols.iter().any(|&c| input.nulls[c][r]) {
            continue;
        }
        tuples.push(cols.iter().map(|&c| &input.cells[c][r]).collect());
    }
    let covered = input.rows > 0
        && (tuples.len() as f64) / (input.rows as f64) >= KEY_NULL_FREE_MIN;
    if !covered {
        return false;
    }
    for i in 0..tuples.len() {
        for j in (i + 1)..tuples.len() {
            if tuples[i] == tuples[j] {
                return false;
            }
        }
    }
    true
}

fn oracle_keys(input: &OracleInput) -> BTreeSet<Vec<String>> {
    let n = input.names.len();
    let mut out = BTreeSet::new();
    let mut single = vec![false; n];
    for c in 0..n {
        if unique_and_covered(input, &[c]) {
            single[c] = true;
            out.insert(vec![input.names[c].clone()]);
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if single[a] || single[b] {
                continue; // a superset of a key is not minimal
            }
            if unique_and_covered(input, &[a, b]) {
                out.insert(vec![input.names[a].clone(), input.names[b].clone()]);
            }
        }
    }
    out
}

/// Random CSV with mixed column kinds, derived columns (to make FDs likely),
/// injected duplicate rows, and injected nulls.
fn random_csv(rng: &mut StdRng) -> String {
    let ncols = rng.gen_range(2..=8);
    let nrows = rng.gen_range(1..=200);

    #[derive(Clone)]
    enum Kind {
        Pool(Vec<String>),
        UniqueInt,
        Derived { source: usize, arity: usize },
        PairDerived { a: usize, b: usize, arity: usize },
    }

    let mut kinds: Vec<Kind> = Vec::new();
    for c in 0..ncols {
        let choice = rng.gen_range(0..10);
        let kind = match choice {
            0 => Kind::Pool(vec!["true".into(), "false".into()]),
            1 => {
                let k = rng.gen_range(2..=5);
                Kind::Pool((0..k).map(|i| format!("{}.{}5", i, i)).collect())
            }
            2 => {
                let k = rng.gen_range(2..=4);
                Kind::Pool((0..k).map(|i| format!("2024-0{}-11", i + 1)).collect())
            }
            3 => Kind::UniqueInt,
            4 | 5 if c > 0 => Kind::Derived {
                source: rng.gen_range(0..c),
                arity: rng.gen_range(2..=4),
            },
            6 if c > 1 => {
                let a = rng.gen_range(0..c - 1);
                Kind::PairDerived { a, b: rng.gen_range(a + 1..c), arity: rng.gen_range(2..=5) }
            }
            7 => {
                let k = rng.gen_range(2..=7);
                Kind::Pool((0..k).map(|i| i.to_string()).collect())
            }
            _ => {
                let k = rng.gen_range(2..=6);
                Kind::Pool((0..k).map(|i| format!("v{i}")).collect())
            }
        };
        kinds.push(kind);
    }

    // Cheap deterministic string hash for derived cells.
    let hash = |s: &str, salt: u64| -> u64 {
        s.bytes().fold(salt.wrapping_mul(1099511628211), |h, b| {
            (h ^ b as u64).wrapping_mul(1099511628211)
        })
    };

    let mut grid: Vec<Vec<String>> = vec![Vec::with_capacity(ncols); nrows];
    let salts: Vec<u64> = (0..ncols).map(|_| rng.gen()).collect();
    for r in 0..nrows {
        for c in 0..ncols {
            let cell = match &kinds[c] {
                Kind::Pool(pool) => pool[rng.gen_range(0..pool.len())].clone(),
                Kind::UniqueInt => format!("{}", r * 3 + rng.gen_range(0..2)),
                Kind::Derived { source, arity } => {
                    format!("d{}", hash(&grid[r][*source], salts[c]) % *arity as u64)
                }
                Kind::PairDerived { a, b, arity } => {
                    let joined = format!("{}|{}", grid[r][*a], grid[r][*b]);
                    format!("p{}", hash(&joined, salts[c]) % *arity as u64)
                }
            };
            grid[r].push(cell);
        }
    }

    // Duplicate some rows wholesale, then punch nulls per column.
    if nrows > 1 {
        for _ in 0..rng.gen_range(0..=nrows / 4) {
            let from = rng.gen_range(0..nrows);
            let to = rng.gen_range(0..nrows);
            grid[to] = grid[from].clone();
        }
    }
    for c in 0..ncols {
        let null_p: f64 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.3) };
        for row in grid.iter_mut() {
            if rng.gen_bool(null_p) {
                row[c] = String::new();
            }
        }
    }

    let mut csv = (0..ncols).map(|c| format!("c{c}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for row in &grid {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}

#[test]
fn criterion_1_dependency_discovery_matches_bruteforce_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xD2D_0001);
    let config = DepConfig::default();

    for case in 0..200 {
        let csv = random_csv(&mut rng);
        let table = crate::table_from_csv(&csv);
        let input = oracle_input(&table);

        let got_fds: BTreeSet<(Vec<String>, String)> = discover_fds(&table, &config)
            .into_iter()
            .map(|fd| (fd.determinants, fd.dependent))
            .collect();
        let want_fds = oracle_fds(&input);
        assert_eq!(
            got_fds, want_fds,
            "case {case}: dependency sets disagree with the oracle\ncsv:\n{csv}"
        );

        let got_keys: BTreeSet<Vec<String>> =
            discover_keys(&table, &config).into_iter().collect();
        let want_keys = oracle_keys(&input);
        assert_eq!(
            got_keys, want_keys,
            "case {case}: key sets disagree with the oracle\ncsv:\n{csv}"
        );
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "200-table oracle suite took {elapsed:?}, budget is 60 s"
    );
}
