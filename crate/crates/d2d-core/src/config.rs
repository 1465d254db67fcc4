//! Run configuration shared by every pipeline stage.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::gateway::GatewayMode;

/// Per-stage sampling temperatures. Structured/evaluator stages default low;
/// generative stages default high; the scoring judge samples at 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageTemperatures {
    pub narrative: f64,
    pub domain: f64,
    pub concepts: f64,
    pub analysis: f64,
    pub evaluation: f64,
    pub reflection: f64,
    pub experts: f64,
    pub judge: f64,
}

impl Default for StageTemperatures {
    fn default() -> Self {
        StageTemperatures {
            narrative: 0.2,
            domain: 0.2,
            concepts: 0.2,
            analysis: 0.7,
            evaluation: 0.2,
            reflection: 0.7,
            experts: 0.7,
            judge: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model_id: String,
    pub judge_model_id: String,
    pub temperatures: StageTemperatures,
    /// Iteration cap for the insight loop.
    pub n_max: u32,
    /// Minimum per-dimension score for early termination (1–4 scale).
    pub threshold: u8,
    pub k_experts: u32,
    pub max_charts: u32,
    pub mode: GatewayMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cassette_path: Option<PathBuf>,
    /// Seed for the renderer's deterministic row sampling.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub base_url: String,
    /// Logprob-weighted judge scoring when the transport can supply token
    /// distributions; otherwise mean of `judge_samples` integer scores.
    pub judge_weighted: bool,
    pub judge_samples: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_id: "gpt-4o".to_string(),
            judge_model_id: "gpt-4o".to_string(),
            temperatures: StageTemperatures::default(),
            n_max: 3,
            threshold: 4,
            k_experts: 3,
            max_charts: 5,
            mode: GatewayMode::Replay,
            cassette_path: None,
            seed: 17,
            output_dir: PathBuf::from("runs"),
            base_url: "https://api.openai.com".to_string(),
            judge_weighted: false,
            judge_samples: 5,
        }
    }
}
