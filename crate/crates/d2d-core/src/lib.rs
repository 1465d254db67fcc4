//! Agentic data-to-dashboard pipeline core.
//!
//! Stages: CSV ingest → table profiling → knowledge-grounded domain detection
//! → concept extraction → self-critiquing insight loop → multi-expert chart
//! planning → grammar-based dashboard rendering, plus a rubric-scored
//! evaluation harness. All model traffic goes through a record/replay gateway
//! so every stage is reproducible offline.

pub mod chart;
pub mod config;
pub mod gateway;
pub mod geval;
pub mod insight;
pub mod knowledge;
pub mod profile;
pub mod reflexion;
pub mod render;
pub mod semantics;
pub mod table;
pub mod testing;
mod util;
