//! Acceptance gate: one test per shipping criterion, each naming exactly
//! what it guarantees. Every test is self-contained and offline; random
//! suites use fixed seeds so a failure is always reproducible.

#[path = "../common/mod.rs"]
mod common;

mod deps_oracle;
mod grammar_validity;
mod loop_laws;
mod replay_determinism;
mod score_arithmetic;
mod structured_robustness;
mod type_corpus;

use d2d_core::profile::{type_table, TypedTable};
use d2d_core::table::{load_table_from_bytes, IngestOptions};

pub fn table_from_csv(csv: &str) -> TypedTable {
    type_table(&load_table_from_bytes(csv.as_bytes(), &IngestOptions::default()).unwrap())
}
