//! Standalone subcommands: offline profiling, judging stored insight
//! artifacts, and re-rendering a run directory's charts and dashboard.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use d2d_core::chart::ChartPlan;
use d2d_core::config::RunConfig;
use d2d_core::gateway::Transport;
use d2d_core::geval::{
    compare_reports, format_lift_table, g_eval_score, EvalError, JudgeContext, LiftReport, Metric,
    MetricScore,
};
use d2d_core::insight::InsightBundle;
use d2d_core::profile::{build_profile, type_table, TableProfile};
use d2d_core::reflexion::LoopTrace;
use d2d_core::semantics::{ConceptSet, DomainFinding};
use d2d_core::table::{load_table, IngestOptions};

use crate::manifest::read_manifest;
use crate::run::{self, RunState};
use crate::CliError;

fn read_artifact<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(path, &bytes)?;
    Ok(())
}

/// Profiles a CSV without any model access: types, summary statistics,
/// dependencies, and candidate keys as pretty-printed JSON.
pub fn cmd_profile(input: &Path, output: &Path) -> Result<(), CliError> {
    let raw = load_table(input, &IngestOptions::default()).map_err(|e| CliError::Artifact {
        path: input.display().to_string(),
        message: e.to_string(),
    })?;
    let typed = type_table(&raw);
    let profile = build_profile(&typed, &run::pipeline_profile_config());
    write_pretty_json(output, &profile)?;
    eprintln!(
        "profiled {} rows x {} columns -> {}",
        profile.row_count,
        profile.columns.len(),
        output.display()
    );
    Ok(())
}

pub struct EvalRequest {
    pub artifact: PathBuf,
    pub baseline: Option<PathBuf>,
    /// Directory holding domain.json and concepts.json for judge context;
    /// defaults to the artifact's run directory (two levels up).
    pub run_dir: Option<PathBuf>,
    pub output: PathBuf,
    pub config: RunConfig,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub artifact: PathBuf,
    pub scores: Vec<MetricScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_scores: Option<Vec<MetricScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftReport>,
}

fn load_bundle_text(path: &Path) -> Result<String, CliError> {
    let bundle: InsightBundle = read_artifact(path)?;
    Ok(serde_json::to_string_pretty(&bundle).expect("bundle serializes"))
}

/// Judge context comes from the run directory's stored domain and concept
/// artifacts when present; otherwise a neutral fallback so standalone
/// artifacts can still be scored.
fn load_judge_context(req: &EvalRequest) -> (DomainFinding, String) {
    let dir = req
        .run_dir
        .clone()
        .or_else(|| req.artifact.parent().and_then(Path::parent).map(Path::to_path_buf));
    if let Some(dir) = dir {
        let domain = read_artifact::<DomainFinding>(&dir.join("domain.json"));
        let concepts = read_artifact::<ConceptSet>(&dir.join("concepts.json"));
        if let (Ok(domain), Ok(concepts)) = (domain, concepts) {
            let digest: Vec<&str> = concepts.concepts.iter().map(|c| c.phrase.as_str()).collect();
            return (domain, digest.join("; "));
        }
        eprintln!(
            "note: no domain.json/concepts.json under {}; scoring without domain context",
            dir.display()
        );
    }
    let neutral = DomainFinding {
        label: "general tabular data".into(),
        definition: "A dataset whose business domain was not established.".into(),
        rationale: "No stored domain finding was available to the judge.".into(),
        knowledge_snippets_used: Vec::new(),
    };
    (neutral, String::from("(none)"))
}

/// Scores all metrics concurrently; result order matches `Metric::ALL`.
fn score_artifact(
    text: &str,
    context: &JudgeContext<'_>,
    gateway: &d2d_core::gateway::Gateway,
    config: &RunConfig,
) -> Result<Vec<MetricScore>, CliError> {
    let mut slots: Vec<Option<Result<MetricScore, EvalError>>> = Vec::new();
    slots.resize_with(Metric::ALL.len(), || None);
    std::thread::scope(|scope| {
        for (slot, metric) in slots.iter_mut().zip(Metric::ALL) {
            scope.spawn(move || *slot = Some(g_eval_score(metric, text, context, gateway, config)));
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.expect("scoring thread filled its slot")
                .map_err(|e| CliError::Stage { stage: "eval", message: e.to_string() })
        })
        .collect()
}

fn normalized_map(scores: &[MetricScore]) -> std::collections::BTreeMap<Metric, f64> {
    scores.iter().map(|s| (s.metric, s.normalized)).collect()
}

pub fn cmd_eval(
    req: &EvalRequest,
    transport_override: Option<Arc<dyn Transport>>,
) -> Result<EvalReport, CliError> {
    let candidate_text = load_bundle_text(&req.artifact)?;
    let baseline_text = match &req.baseline {
        Some(p) => Some(load_bundle_text(p)?),
        None => None,
    };
    let (domain, digest) = load_judge_context(req);
    let context = JudgeContext { domain: &domain, concepts_digest: &digest };
    let gateway = run::build_gateway(&req.config, transport_override)?;

    let baseline_scores = match &baseline_text {
        Some(text) => Some(score_artifact(text, &context, &gateway, &req.config)?),
        None => None,
    };
    let scores = score_artifact(&candidate_text, &context, &gateway, &req.config)?;

    for s in &scores {
        println!(
            "{:<16} raw {:.3}  normalized {:.3}  ({})",
            s.metric.key(),
            s.raw,
            s.normalized,
            if s.weighted { "weighted".to_string() } else { format!("{} samples", s.n_samples) }
        );
    }

    let lift = match &baseline_scores {
        Some(base) => {
            let report = compare_reports(&normalized_map(base), &normalized_map(&scores))
                .map_err(|e| CliError::Stage { stage: "eval", message: e.to_string() })?;
            println!("\n{}", format_lift_table(&report));
            Some(report)
        }
        None => None,
    };

    let report = EvalReport {
        artifact: req.artifact.clone(),
        scores,
        baseline: req.baseline.clone(),
        baseline_scores,
        lift,
    };
    write_pretty_json(&req.output, &report)?;
    eprintln!("wrote {}", req.output.display());
    Ok(report)
}

pub struct RenderRequest {
    pub run_dir: PathBuf,
    /// Overrides the input path recorded in the manifest (e.g. when the run
    /// directory moved relative to the data).
    pub input: Option<PathBuf>,
}

/// Rebuilds charts/ and dashboard.html from a completed run's stored
/// artifacts, without any model access. The manifest itself is left as the
/// original run wrote it.
pub fn cmd_render(req: &RenderRequest) -> Result<(), CliError> {
    let manifest = read_manifest(&req.run_dir)?;
    let input = req.input.clone().unwrap_or_else(|| manifest.input.path.clone());

    let profile: TableProfile = read_artifact(&req.run_dir.join("profile.json"))?;
    let domain: DomainFinding = read_artifact(&req.run_dir.join("domain.json"))?;
    let plans: Vec<ChartPlan> = read_artifact(&req.run_dir.join("chart_plans.json"))?;
    let trace: LoopTrace = read_artifact(&req.run_dir.join("loop_trace.json"))?;
    let bundle: InsightBundle = read_artifact(
        &req.run_dir.join(format!("insights/iteration_{}.json", trace.best_iteration)),
    )?;

    let raw = load_table(&input, &IngestOptions::default()).map_err(|e| CliError::Artifact {
        path: input.display().to_string(),
        message: e.to_string(),
    })?;
    let typed = type_table(&raw);

    let mut state = RunState::new(req.run_dir.clone());
    run::render_outputs(
        &mut state,
        &typed,
        &profile,
        &plans,
        &bundle,
        &domain,
        &manifest.run_digest,
        manifest.config.seed,
    )
    .map_err(|message| CliError::Stage { stage: "render", message })?;
    for w in &state.warnings {
        eprintln!("note: {w}");
    }
    eprintln!(
        "re-rendered {} chart(s) -> {}",
        plans.len(),
        req.run_dir.join("dashboard.html").display()
    );
    Ok(())
}
