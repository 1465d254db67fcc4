//! Helpers shared by the CLI integration tests: paths into the bundled
//! sample data and a canned replay run of the marketing demo.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use d2d_cli::run::{execute_run, RunRequest, RunSummary};
use d2d_core::config::RunConfig;
use d2d_core::gateway::GatewayMode;

pub fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn run_cassette() -> PathBuf {
    workspace_path("samples/cassettes/run_marketing.json")
}

pub fn eval_cassette() -> PathBuf {
    workspace_path("samples/cassettes/eval_marketing.json")
}

pub fn demo_config(mode: GatewayMode, output_dir: &Path) -> RunConfig {
    RunConfig {
        mode,
        cassette_path: Some(run_cassette()),
        output_dir: output_dir.to_path_buf(),
        ..RunConfig::default()
    }
}

pub fn demo_request(mode: GatewayMode, output_dir: &Path) -> RunRequest {
    RunRequest {
        input: workspace_path("samples/marketing.csv"),
        knowledge: Some(workspace_path("knowledge/marketing.json")),
        config: demo_config(mode, output_dir),
    }
}

/// Replays the bundled marketing demo into `output_dir`.
pub fn replay_demo(output_dir: &Path) -> RunSummary {
    execute_run(&demo_request(GatewayMode::Replay, output_dir), None)
        .expect("replay of the bundled demo succeeds")
}

pub fn read_to_string(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}
