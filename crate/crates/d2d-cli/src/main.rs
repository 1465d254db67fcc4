use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use d2d_cli::commands::{cmd_eval, cmd_profile, cmd_render, EvalRequest, RenderRequest};
use d2d_cli::run::{execute_run, RunRequest};
use d2d_cli::settings::{resolve_config, Overrides};
use d2d_cli::CliError;
use d2d_core::gateway::GatewayMode;

#[derive(Parser)]
#[command(name = "d2d", version, about = "Agentic data-to-dashboard pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: profile, domain, insights, charts, dashboard.
    Run(RunArgs),
    /// Profile a CSV offline (no model access) and write the result as JSON.
    Profile(ProfileArgs),
    /// Score a stored insight artifact with the rubric judge.
    Eval(EvalArgs),
    /// Rebuild charts and dashboard from a completed run directory.
    Render(RenderArgs),
}

#[derive(Args)]
struct ModelFlags {
    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model for analysis, planning, and narration stages.
    #[arg(long)]
    model: Option<String>,
    /// Model used as the scoring judge.
    #[arg(long)]
    judge_model: Option<String>,
    /// Transport mode: live, record, or replay.
    #[arg(long)]
    mode: Option<GatewayMode>,
    /// Cassette file for record/replay modes.
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Chat API base URL for live/record modes.
    #[arg(long)]
    base_url: Option<String>,
    /// Samples per judge metric when sampling scores.
    #[arg(long)]
    judge_samples: Option<u32>,
    /// Score via token log-probabilities instead of sampling when available.
    #[arg(long)]
    judge_weighted: Option<bool>,
}

impl ModelFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            model_id: self.model.clone(),
            judge_model_id: self.judge_model.clone(),
            mode: self.mode,
            cassette_path: self.cassette.clone(),
            base_url: self.base_url.clone(),
            judge_samples: self.judge_samples,
            judge_weighted: self.judge_weighted,
            ..Overrides::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Domain knowledge JSON file.
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Directory that receives all run artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Maximum refinement iterations.
    #[arg(long)]
    n_max: Option<u32>,
    /// Minimum rubric score (1-4) that stops refinement.
    #[arg(long)]
    threshold: Option<u8>,
    /// Number of chart-design experts per panel.
    #[arg(long)]
    k_experts: Option<u32>,
    /// Maximum charts on the dashboard.
    #[arg(long)]
    max_charts: Option<u32>,
    /// Seed for row sampling.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model_flags: ModelFlags,
}

#[derive(Args)]
struct ProfileArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the profile JSON.
    #[arg(long, default_value = "profile.json")]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Insight artifact (JSON bundle) to score.
    #[arg(long)]
    artifact: PathBuf,
    /// Earlier artifact to score as the baseline for a lift table.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Run directory supplying domain/concept context for the judge.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Where to write the scoring report JSON.
    #[arg(long, default_value = "geval_report.json")]
    output: PathBuf,
    #[command(flatten)]
    model_flags: ModelFlags,
}

#[derive(Args)]
struct RenderArgs {
    /// Completed run directory (must contain manifest.json).
    #[arg(long)]
    run_dir: PathBuf,
    /// CSV path override when the manifest's recorded input moved.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut overrides = args.model_flags.overrides();
            overrides.n_max = args.n_max;
            overrides.threshold = args.threshold;
            overrides.k_experts = args.k_experts;
            overrides.max_charts = args.max_charts;
            overrides.seed = args.seed;
            overrides.output_dir = args.output_dir;
            let config = resolve_config(args.model_flags.config.as_deref(), &overrides)?;
            let req =
                RunRequest { input: args.input, knowledge: args.knowledge, config };
            execute_run(&req, None).map(|_| ())
        }
        Command::Profile(args) => cmd_profile(&args.input, &args.output),
        Command::Eval(args) => {
            let overrides = args.model_flags.overrides();
            let config = resolve_config(args.model_flags.config.as_deref(), &overrides)?;
            let req = EvalRequest {
                artifact: args.artifact,
                baseline: args.baseline,
                run_dir: args.run_dir,
                output: args.output,
                config,
            };
            cmd_eval(&req, None).map(|_| ())
        }
        Command::Render(args) => {
            cmd_render(&RenderRequest { run_dir: args.run_dir, input: args.input })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
