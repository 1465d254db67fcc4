//! Config assembly with flag > file > default precedence.

use std::path::{Path, PathBuf};

use d2d_core::config::RunConfig;
use d2d_core::gateway::GatewayMode;

use crate::CliError;

/// Flag-level overrides; `None` means "not given on the command line".
/// Applied on top of the file-or-default config, so precedence is
/// flag > file > built-in default, field by field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model_id: Option<String>,
    pub judge_model_id: Option<String>,
    pub n_max: Option<u32>,
    pub threshold: Option<u8>,
    pub k_experts: Option<u32>,
    pub max_charts: Option<u32>,
    pub mode: Option<GatewayMode>,
    pub cassette_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub base_url: Option<String>,
    pub judge_samples: Option<u32>,
    pub judge_weighted: Option<bool>,
}

/// TOML config file deserialized over built-in defaults; absent file (when no
/// path was given) is simply the defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))
        }
    }
}

pub fn apply_overrides(config: &mut RunConfig, o: &Overrides) {
    macro_rules! take {
        ($field:ident) => {
            if let Some(v) = &o.$field {
                config.$field = v.clone();
            }
        };
    }
    take!(model_id);
    take!(judge_model_id);
    take!(n_max);
    take!(threshold);
    take!(k_experts);
    take!(max_charts);
    take!(mode);
    take!(seed);
    take!(output_dir);
    take!(base_url);
    take!(judge_samples);
    take!(judge_weighted);
    if o.cassette_path.is_some() {
        config.cassette_path = o.cassette_path.clone();
    }
}

pub fn resolve_config(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = load_config(file)?;
    apply_overrides(&mut config, overrides);
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    if config.n_max < 1 {
        return Err(CliError::Config("n_max must be at least 1".into()));
    }
    if !(1..=4).contains(&config.threshold) {
        return Err(CliError::Config("threshold must be between 1 and 4".into()));
    }
    if config.k_experts < 1 {
        return Err(CliError::Config("k_experts must be at least 1".into()));
    }
    // Cassette and API-key requirements are checked at run startup, where the
    // gateway is actually built — profiling needs neither.
    Ok(())
}
