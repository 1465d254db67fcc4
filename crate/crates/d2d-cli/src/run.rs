//! End-to-end run orchestration: a strict linear pipeline from CSV to
//! dashboard, persisting every stage's artifact as it completes and the
//! manifest last. A manifest with a success status is the marker that every
//! listed artifact exists and matches its digest.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use d2d_core::chart::{plan_chart, select_insights, ChartPlan};
use d2d_core::config::RunConfig;
use d2d_core::gateway::{
    Gateway, GatewayConfig, GatewayMode, HttpTransport, Transport, API_KEY_ENV,
};
use d2d_core::insight::InsightBundle;
use d2d_core::knowledge::{JsonKnowledge, KnowledgeSource};
use d2d_core::profile::{
    build_profile, enrich_profile, type_table, DepConfig, ProfileConfig, TableProfile, TypedTable,
};
use d2d_core::reflexion::{run_loop, IterationRecord};
use d2d_core::render::{assemble_dashboard, emit_spec, prepare_chart_data, validate_spec, ChartSpec};
use d2d_core::semantics::{detect_domain, extract_concepts, DomainFinding};
use d2d_core::table::{load_table, IngestOptions};

use crate::manifest::{
    run_digest, sha256_hex, write_manifest, InputRecord, RunManifest, RunStatus,
};
use crate::CliError;

pub struct RunRequest {
    pub input: PathBuf,
    pub knowledge: Option<PathBuf>,
    pub config: RunConfig,
}

#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

/// Key-implied dependencies are pruned from pipeline profiles so prompts list
/// only the informative structure.
pub fn pipeline_profile_config() -> ProfileConfig {
    ProfileConfig { deps: DepConfig { max_set_size: 2, prune_key_fds: true } }
}

fn build_transport(
    config: &RunConfig,
    transport_override: Option<Arc<dyn Transport>>,
) -> Result<Option<Arc<dyn Transport>>, CliError> {
    match config.mode {
        GatewayMode::Replay => Ok(None),
        GatewayMode::Live | GatewayMode::Record => match transport_override {
            Some(t) => Ok(Some(t)),
            None => {
                let t = HttpTransport::from_env(&config.base_url)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Some(Arc::new(t)))
            }
        },
    }
}

pub fn build_gateway(
    config: &RunConfig,
    transport_override: Option<Arc<dyn Transport>>,
) -> Result<Gateway, CliError> {
    let transport = build_transport(config, transport_override)?;
    let gw_config = GatewayConfig {
        mode: config.mode,
        cassette_path: config.cassette_path.clone(),
        ..GatewayConfig::default()
    };
    Gateway::new(gw_config, transport).map_err(|e| CliError::Config(e.to_string()))
}

/// Tracks everything that accumulates over a run and lands in the manifest.
pub(crate) struct RunState {
    pub(crate) run_dir: PathBuf,
    pub(crate) artifacts: BTreeMap<String, String>,
    pub(crate) timings_ms: BTreeMap<String, u64>,
    pub(crate) warnings: Vec<String>,
}

impl RunState {
    pub(crate) fn new(run_dir: PathBuf) -> Self {
        RunState {
            run_dir,
            artifacts: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.run_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }
}

fn write_iteration_artifacts(
    state: &mut RunState,
    records: &[IterationRecord],
) -> Result<(), CliError> {
    for r in records {
        state.write_json(&format!("insights/iteration_{}.json", r.iteration), &r.bundle)?;
        state.write_json(&format!("evaluation/iteration_{}.json", r.iteration), &r.report)?;
        if let Some(reflection) = &r.reflection {
            let mut bytes = reflection.clone().into_bytes();
            bytes.push(b'\n');
            state.write(&format!("reflections/iteration_{}.txt", r.iteration), &bytes)?;
        }
        for w in &r.warnings {
            state.warnings.push(format!("loop iteration {}: {w}", r.iteration));
        }
    }
    Ok(())
}

/// Emits validated grammar docs and the dashboard for a set of plans; shared
/// by the run pipeline and the standalone re-render command.
pub(crate) fn render_outputs(
    state: &mut RunState,
    typed: &TypedTable,
    profile: &TableProfile,
    plans: &[ChartPlan],
    bundle: &InsightBundle,
    domain: &DomainFinding,
    digest: &str,
    seed: u64,
) -> Result<(), String> {
    let mut specs: Vec<ChartSpec> = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        let data = prepare_chart_data(typed, plan, seed)
            .map_err(|e| format!("chart {i}: {e}"))?;
        if data.sampled {
            state
                .warnings
                .push(format!("render: chart {i} data sampled down to {} rows", data.rows.len()));
        }
        let spec = emit_spec(plan, i, &data, profile);
        let problems = validate_spec(&spec.grammar_doc);
        if !problems.is_empty() {
            return Err(format!("chart {i} failed grammar validation: {}", problems.join("; ")));
        }
        state
            .write_json(&format!("charts/chart_{i}.vl.json"), &spec.grammar_doc)
            .map_err(|e| e.to_string())?;
        specs.push(spec);
    }
    let dashboard = assemble_dashboard(&specs, bundle, domain, plans, digest);
    state.write("dashboard.html", dashboard.html.as_bytes()).map_err(|e| e.to_string())?;
    Ok(())
}

fn run_id(digest: &str) -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}-{}", &digest[..12])
}

/// Runs the full pipeline. `transport_override` substitutes the network
/// transport (scripted models in tests, cassette recording against a stub);
/// replay mode never constructs a transport at all.
pub fn execute_run(
    req: &RunRequest,
    transport_override: Option<Arc<dyn Transport>>,
) -> Result<RunSummary, CliError> {
    let config = &req.config;

    // Fail on unusable configuration before touching the output directory.
    if config.mode != GatewayMode::Replay
        && transport_override.is_none()
        && std::env::var(API_KEY_ENV).is_err()
    {
        return Err(CliError::Config(format!(
            "{API_KEY_ENV} must be set for live or record mode"
        )));
    }
    if config.mode != GatewayMode::Live && config.cassette_path.is_none() {
        return Err(CliError::Config("record and replay modes require a cassette path".into()));
    }

    let input_bytes = std::fs::read(&req.input).map_err(|e| CliError::Artifact {
        path: req.input.display().to_string(),
        message: e.to_string(),
    })?;
    let knowledge_bytes = match &req.knowledge {
        Some(p) => Some(std::fs::read(p).map_err(|e| CliError::Artifact {
            path: p.display().to_string(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let knowledge: Box<dyn KnowledgeSource> = match &req.knowledge {
        Some(p) => Box::new(JsonKnowledge::load(p).map_err(|e| CliError::Artifact {
            path: p.display().to_string(),
            message: e.to_string(),
        })?),
        None => Box::new(JsonKnowledge::empty()),
    };

    let gateway = build_gateway(config, transport_override)?;
    let digest = run_digest(config, &input_bytes, knowledge_bytes.as_deref());
    let run_dir = config.output_dir.clone();
    std::fs::create_dir_all(&run_dir)?;

    let mut state = RunState::new(run_dir.clone());
    let input_record =
        InputRecord { path: req.input.clone(), sha256: sha256_hex(&input_bytes) };
    let id = run_id(&digest);

    // On any stage failure: persist what exists plus an error-annotated
    // manifest, then surface the stage error.
    macro_rules! fail {
        ($stage:literal, $message:expr) => {{
            let message: String = $message;
            let manifest = RunManifest {
                run_id: id.clone(),
                status: RunStatus::Error { stage: $stage.into(), message: message.clone() },
                config: config.clone(),
                input: input_record.clone(),
                knowledge_path: req.knowledge.clone(),
                run_digest: digest.clone(),
                artifacts: state.artifacts.clone(),
                timings_ms: state.timings_ms.clone(),
                warnings: state.warnings.clone(),
            };
            write_manifest(&run_dir, &manifest)?;
            return Err(CliError::Stage { stage: $stage, message });
        }};
    }
    macro_rules! stage {
        ($name:literal, $body:expr) => {{
            let started = Instant::now();
            let result = $body;
            state
                .timings_ms
                .insert($name.to_string(), started.elapsed().as_millis() as u64);
            match result {
                Ok(v) => v,
                Err(e) => fail!($name, e.to_string()),
            }
        }};
    }

    eprintln!("run {}: input {}", id, req.input.display());

    let typed = stage!("ingest", {
        load_table(&req.input, &IngestOptions::default()).map(|raw| type_table(&raw))
    });

    let mut profile = {
        let started = Instant::now();
        let p = build_profile(&typed, &pipeline_profile_config());
        state.timings_ms.insert("profile".into(), started.elapsed().as_millis() as u64);
        p
    };
    eprintln!("profile: {} rows, {} columns", profile.row_count, profile.columns.len());

    stage!("narrative", {
        enrich_profile(&mut profile, &gateway, config).map(|warnings| {
            state.warnings.extend(warnings.into_iter().map(|w| format!("narrative: {w}")));
        })
    });
    state.write_json("profile.json", &profile)?;

    let domain = stage!("domain", detect_domain(&profile, knowledge.as_ref(), &gateway, config));
    state.write_json("domain.json", &domain)?;
    eprintln!("domain: {}", domain.label);

    let concepts = stage!("concepts", {
        extract_concepts(&profile, &domain, &gateway, config).map(|(set, warnings)| {
            state.warnings.extend(warnings.into_iter().map(|w| format!("concepts: {w}")));
            set
        })
    });
    state.write_json("concepts.json", &concepts)?;

    let outcome = {
        let started = Instant::now();
        let result = run_loop(&profile, &domain, &concepts, &gateway, config);
        state.timings_ms.insert("loop".into(), started.elapsed().as_millis() as u64);
        match result {
            Ok(outcome) => {
                write_iteration_artifacts(&mut state, &outcome.records)?;
                state.write_json("loop_trace.json", &outcome.trace)?;
                outcome
            }
            Err(failure) => {
                write_iteration_artifacts(&mut state, &failure.records)?;
                fail!("loop", failure.to_string());
            }
        }
    };
    eprintln!(
        "loop: {} iteration(s), best {}",
        outcome.records.len(),
        outcome.trace.best_iteration
    );

    let plans = stage!("plan", {
        let selected = select_insights(&outcome.best, config.max_charts as usize);
        let mut plans: Vec<ChartPlan> = Vec::with_capacity(selected.len());
        let mut err: Option<String> = None;
        for r in selected {
            let insight = &outcome.best.bucket(r.lens)[r.index];
            match plan_chart(insight, r, &profile, &gateway, config) {
                Ok(p) => plans.push(p),
                Err(e) => {
                    err = Some(format!("insight {}[{}]: {e}", r.lens.key(), r.index));
                    break;
                }
            }
        }
        match err {
            None => Ok(plans),
            Some(m) => Err(m),
        }
    });
    state.write_json("chart_plans.json", &plans)?;
    eprintln!("plan: {} chart(s)", plans.len());

    stage!("render", {
        render_outputs(
            &mut state,
            &typed,
            &profile,
            &plans,
            &outcome.best,
            &domain,
            &digest,
            config.seed,
        )
    });

    let manifest = RunManifest {
        run_id: id,
        status: RunStatus::Success,
        config: config.clone(),
        input: input_record,
        knowledge_path: req.knowledge.clone(),
        run_digest: digest,
        artifacts: state.artifacts,
        timings_ms: state.timings_ms,
        warnings: state.warnings,
    };
    write_manifest(&run_dir, &manifest)?;
    eprintln!("run complete: {}", run_dir.join("dashboard.html").display());

    Ok(RunSummary { run_dir, manifest })
}
