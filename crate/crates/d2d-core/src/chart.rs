//! Chart planning: a panel of expert personas independently proposes a chart
//! for each selected insight; on disagreement a moderated debate call
//! converges the panel, and the result is validated against hard
//! chart-type/encoding compatibility rules.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::insight::{Insight, InsightBundle, Lens};
use crate::profile::{InferredType, TableProfile};

pub const EXPERT_PROPOSAL_TAG: &str = "expert_proposal";
pub const CHART_CONSENSUS_TAG: &str = "chart_consensus";
pub const MAX_ANNOTATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    StackedBar,
    Line,
    Scatter,
    Box,
    Heatmap,
    Pie,
}

impl ChartType {
    pub const ALL: [ChartType; 7] = [
        ChartType::Bar,
        ChartType::StackedBar,
        ChartType::Line,
        ChartType::Scatter,
        ChartType::Box,
        ChartType::Heatmap,
        ChartType::Pie,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::StackedBar => "stacked_bar",
            ChartType::Line => "line",
            ChartType::Scatter => "scatter",
            ChartType::Box => "box",
            ChartType::Heatmap => "heatmap",
            ChartType::Pie => "pie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Sum,
    Mean,
    Count,
    Median,
}

impl Aggregate {
    pub fn key(self) -> &'static str {
        match self {
            Aggregate::Sum => "sum",
            Aggregate::Mean => "mean",
            Aggregate::Count => "count",
            Aggregate::Median => "median",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encodings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub facet: Option<String>,
}

impl Encodings {
    pub fn columns(&self) -> Vec<&str> {
        [&self.x, &self.y, &self.color, &self.facet]
            .into_iter()
            .flatten()
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertProposal {
    /// 1-based panel position.
    pub expert_id: usize,
    pub chart_type: ChartType,
    pub encodings: Encodings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightRef {
    pub lens: Lens,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPlan {
    pub insight_ref: InsightRef,
    pub chart_type: ChartType,
    pub encodings: Encodings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    pub rationale: String,
    pub key_insight_narrative: String,
    pub annotations: Vec<String>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("chart plan still violates compatibility rules after repair: {}", problems.join("; "))]
    Validation { problems: Vec<String> },
}

/// Hard compatibility rules, shared verbatim with the planner prompts so the
/// model sees exactly what the validator enforces.
pub const CHART_RULES: &str = "\
- bar: x is categorical, boolean, or datetime; y is a numeric measure (omit y only with aggregate count); no color.
- stacked_bar: like bar plus a required categorical or boolean color.
- line: x is datetime, integer, or decimal; y is a numeric measure (omit y only with aggregate count); optional categorical or boolean color.
- scatter: x and y are numeric; no aggregate; optional categorical or boolean color.
- box: x is categorical or boolean; y is numeric; no aggregate; no color.
- heatmap: x and y are categorical or boolean; color is a numeric measure; aggregate must be sum, mean, or median.
- pie: color is the categorical or boolean slice field; aggregate is required; y is the numeric measure unless aggregate is count.
- facet: optional categorical or boolean small-multiples channel, allowed for bar, stacked_bar, line, scatter, and box only.
- aggregate count never takes a y measure.";

fn is_numeric(t: InferredType) -> bool {
    matches!(t, InferredType::Integer | InferredType::Decimal)
}

fn is_catlike(t: InferredType) -> bool {
    matches!(t, InferredType::Categorical | InferredType::Boolean)
}

fn resolve_type(
    problems: &mut Vec<String>,
    profile: &TableProfile,
    channel: &str,
    name: &Option<String>,
) -> Option<InferredType> {
    let name = name.as_deref()?;
    match profile.column(name) {
        Some(c) => Some(c.inferred_type),
        None => {
            problems.push(format!("{channel} references unknown column {name:?}"));
            None
        }
    }
}

struct RuleCheck {
    problems: Vec<String>,
}

impl RuleCheck {
    fn require(&mut self, ok: bool, msg: &str) {
        if !ok {
            self.problems.push(msg.to_string());
        }
    }

    /// Measure rule shared by aggregating chart types: count ⟹ no y;
    /// anything else ⟹ numeric y.
    fn measure(&mut self, label: &str, counts: bool, y_named: bool, y: Option<InferredType>) {
        if counts {
            self.require(!y_named, &format!("{label}: aggregate count takes no y measure"));
        } else {
            self.require(y_named, &format!("{label}: y measure is required without aggregate count"));
            if let Some(t) = y {
                self.require(is_numeric(t), &format!("{label}: y must be numeric, got {t}"));
            }
        }
    }
}

/// All compatibility violations for the decision, empty when valid.
pub fn validate_plan(
    chart_type: ChartType,
    encodings: &Encodings,
    aggregate: Option<Aggregate>,
    profile: &TableProfile,
) -> Vec<String> {
    let mut problems = Vec::new();
    let x = resolve_type(&mut problems, profile, "x", &encodings.x);
    let y = resolve_type(&mut problems, profile, "y", &encodings.y);
    let color = resolve_type(&mut problems, profile, "color", &encodings.color);
    let facet = resolve_type(&mut problems, profile, "facet", &encodings.facet);
    // Unknown columns already reported; only type/shape rules from here on.
    let mut c = RuleCheck { problems };

    let counts = aggregate == Some(Aggregate::Count);
    match chart_type {
        ChartType::Bar | ChartType::StackedBar => {
            let label = chart_type.key();
            c.require(encodings.x.is_some(), &format!("{label}: x is required"));
            if let Some(t) = x {
                c.require(
                    is_catlike(t) || t == InferredType::Datetime,
                    &format!("{label}: x must be categorical, boolean, or datetime, got {t}"),
                );
            }
            c.measure(label, counts, encodings.y.is_some(), y);
            if chart_type == ChartType::Bar {
                c.require(encodings.color.is_none(), "bar: color is not allowed");
            } else {
                c.require(encodings.color.is_some(), "stacked_bar: color is required");
                if let Some(t) = color {
                    c.require(
                        is_catlike(t),
                        &format!("stacked_bar: color must be categorical or boolean, got {t}"),
                    );
                }
            }
            if let Some(t) = facet {
                c.require(
                    is_catlike(t),
                    &format!("{label}: facet must be categorical or boolean, got {t}"),
                );
            }
        }
        ChartType::Line => {
            c.require(encodings.x.is_some(), "line: x is required");
            if let Some(t) = x {
                c.require(
                    matches!(t, InferredType::Datetime | InferredType::Integer | InferredType::Decimal),
                    &format!("line: x must be datetime, integer, or decimal, got {t}"),
                );
            }
            c.measure("line", counts, encodings.y.is_some(), y);
            if let Some(t) = color {
                c.require(
                    is_catlike(t),
                    &format!("line: color must be categorical or boolean, got {t}"),
                );
            }
            if let Some(t) = facet {
                c.require(is_catlike(t), &format!("line: facet must be categorical or boolean, got {t}"));
            }
        }
        ChartType::Scatter => {
            c.require(aggregate.is_none(), "scatter: aggregate is not allowed");
            c.require(encodings.x.is_some(), "scatter: x is required");
            c.require(encodings.y.is_some(), "scatter: y is required");
            for (t, ch) in [(x, "x"), (y, "y")] {
                if let Some(t) = t {
                    c.require(is_numeric(t), &format!("scatter: {ch} must be numeric, got {t}"));
                }
            }
            if let Some(t) = color {
                c.require(
                    is_catlike(t),
                    &format!("scatter: color must be categorical or boolean, got {t}"),
                );
            }
            if let Some(t) = facet {
                c.require(
                    is_catlike(t),
                    &format!("scatter: facet must be categorical or boolean, got {t}"),
                );
            }
        }
        ChartType::Box => {
            c.require(aggregate.is_none(), "box: aggregate is not allowed");
            c.require(encodings.color.is_none(), "box: color is not allowed");
            c.require(encodings.x.is_some(), "box: x is required");
            c.require(encodings.y.is_some(), "box: y is required");
            if let Some(t) = x {
                c.require(is_catlike(t), &format!("box: x must be categorical or boolean, got {t}"));
            }
            if let Some(t) = y {
                c.require(is_numeric(t), &format!("box: y must be numeric, got {t}"));
            }
            if let Some(t) = facet {
                c.require(is_catlike(t), &format!("box: facet must be categorical or boolean, got {t}"));
            }
        }
        ChartType::Heatmap => {
            c.require(
                matches!(aggregate, Some(Aggregate::Sum | Aggregate::Mean | Aggregate::Median)),
                "heatmap: aggregate must be sum, mean, or median",
            );
            c.require(encodings.x.is_some(), "heatmap: x is required");
            c.require(encodings.y.is_some(), "heatmap: y is required");
            c.require(encodings.color.is_some(), "heatmap: color measure is required");
            c.require(encodings.facet.is_none(), "heatmap: facet is not allowed");
            for (t, ch) in [(x, "x"), (y, "y")] {
                if let Some(t) = t {
                    c.require(
                        is_catlike(t),
                        &format!("heatmap: {ch} must be categorical or boolean, got {t}"),
                    );
                }
            }
            if let Some(t) = color {
                c.require(is_numeric(t), &format!("heatmap: color must be numeric, got {t}"));
            }
        }
        ChartType::Pie => {
            c.require(encodings.x.is_none(), "pie: x is not allowed");
            c.require(encodings.facet.is_none(), "pie: facet is not allowed");
            c.require(encodings.color.is_some(), "pie: color slice field is required");
            c.require(aggregate.is_some(), "pie: aggregate is required");
            if let Some(t) = color {
                c.require(
                    is_catlike(t),
                    &format!("pie: color must be categorical or boolean, got {t}"),
                );
            }
            c.measure("pie", counts, encodings.y.is_some(), y);
        }
    }
    c.problems
}

/// Round-robin insight selection across lenses (domain_related first),
/// preferring insights that carry a viz_hint. Pure and deterministic.
pub fn select_insights(bundle: &InsightBundle, max_charts: usize) -> Vec<InsightRef> {
    let order = [Lens::DomainRelated, Lens::Descriptive, Lens::Predictive];
    let mut queues: Vec<Vec<InsightRef>> = order
        .iter()
        .map(|&lens| {
            let bucket = bundle.bucket(lens);
            let mut q: Vec<InsightRef> = (0..bucket.len())
                .filter(|&i| bucket[i].viz_hint.is_some())
                .map(|index| InsightRef { lens, index })
                .collect();
            q.extend(
                (0..bucket.len())
                    .filter(|&i| bucket[i].viz_hint.is_none())
                    .map(|index| InsightRef { lens, index }),
            );
            q.reverse(); // pop() takes from the front
            q
        })
        .collect();

    let mut selected = Vec::new();
    while selected.len() < max_charts && queues.iter().any(|q| !q.is_empty()) {
        for q in queues.iter_mut() {
            if selected.len() == max_charts {
                break;
            }
            if let Some(r) = q.pop() {
                selected.push(r);
            }
        }
    }
    selected
}

static PROPOSAL_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    json!({
        "type": "object",
        "required": ["chart_type", "encodings", "rationale"],
        "properties": {
            "chart_type": {"enum": ChartType::ALL.iter().map(|c| c.key()).collect::<Vec<_>>()},
            "encodings": {
                "type": "object",
                "properties": {
                    "x": {"type": "string"},
                    "y": {"type": "string"},
                    "color": {"type": "string"},
                    "facet": {"type": "string"}
                },
                "additionalProperties": false
            },
            "aggregate": {"enum": ["sum", "mean", "count", "median"]},
            "rationale": {"type": "string", "minLength": 1}
        },
        "additionalProperties": false
    })
});

static CONSENSUS_SCHEMA: Lazy<serde_json::Value> = Lazy::new(|| {
    let mut schema = PROPOSAL_SCHEMA.clone();
    let obj = schema.as_object_mut().unwrap();
    obj["required"] = json!(["chart_type", "encodings", "rationale", "key_insight_narrative", "annotations"]);
    let props = obj["properties"].as_object_mut().unwrap();
    props.insert("key_insight_narrative".into(), json!({"type": "string", "minLength": 1}));
    props.insert(
        "annotations".into(),
        json!({"type": "array", "items": {"type": "string", "minLength": 1}, "maxItems": MAX_ANNOTATIONS}),
    );
    schema
});

fn persona(expert_id: usize) -> String {
    match expert_id {
        1 => "You are expert 1 on a chart-design panel: a visualization specialist who \
              prioritizes perceptual effectiveness and picking the right mark for the \
              data's structure."
            .to_string(),
        2 => "You are expert 2 on a chart-design panel: a statistician who prioritizes \
              faithful representation of distributions, scales, and aggregation."
            .to_string(),
        3 => "You are expert 3 on a chart-design panel: a business analyst who \
              prioritizes decision relevance and readability for non-technical \
              stakeholders."
            .to_string(),
        n => format!("You are expert {n} on a chart-design panel: an experienced dashboard designer."),
    }
}

fn insight_block(insight: &Insight) -> String {
    let mut s = format!("Insight ({}): {}\n", insight.lens.key(), insight.statement);
    for ev in &insight.evidence {
        s.push_str(&format!("  evidence — {}: {}\n", ev.reference, ev.statistic));
    }
    if let Some(h) = &insight.viz_hint {
        s.push_str(&format!("  suggested visualization: {h}\n"));
    }
    s
}

fn shared_context(insight: &Insight, profile: &TableProfile) -> String {
    format!(
        "An insight about a dataset needs a chart.\n\nDataset structure:\n\n{}\n{}\n\
         Chart vocabulary and rules:\n{CHART_RULES}\n",
        profile.synopsis(),
        insight_block(insight)
    )
}

fn canonicalize(encodings: &mut Encodings, profile: &TableProfile) {
    for field in [&mut encodings.x, &mut encodings.y, &mut encodings.color, &mut encodings.facet] {
        if let Some(name) = field {
            if let Some(col) =
                profile.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name.trim()))
            {
                *name = col.name.clone();
            } else {
                *name = name.trim().to_string();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Decision {
    chart_type: ChartType,
    encodings: Encodings,
    aggregate: Option<Aggregate>,
}

fn parse_decision(raw: &serde_json::Value, profile: &TableProfile) -> Decision {
    let chart_type = serde_json::from_value(raw["chart_type"].clone()).expect("schema-valid enum");
    let mut encodings: Encodings =
        serde_json::from_value(raw["encodings"].clone()).unwrap_or_default();
    canonicalize(&mut encodings, profile);
    let aggregate = raw
        .get("aggregate")
        .and_then(|a| serde_json::from_value(a.clone()).ok());
    Decision { chart_type, encodings, aggregate }
}

fn proposal_lines(proposals: &[ExpertProposal]) -> String {
    proposals
        .iter()
        .map(|p| {
            let enc = serde_json::to_string(&p.encodings).expect("encodings serialize");
            let agg = p.aggregate.map(|a| a.key()).unwrap_or("none");
            format!(
                "Expert {}: chart_type {}, encodings {}, aggregate {} — {}",
                p.expert_id,
                p.chart_type.key(),
                enc,
                agg,
                p.rationale
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Panel consensus for one insight. The expert proposals run concurrently;
/// unanimity (same chart type, encodings, and aggregate) skips the debate.
/// The converged decision must pass [`validate_plan`]; one gateway repair is
/// attempted before [`PlanError::Validation`].
pub fn plan_chart(
    insight: &Insight,
    insight_ref: InsightRef,
    profile: &TableProfile,
    gateway: &Gateway,
    config: &RunConfig,
) -> Result<ChartPlan, PlanError> {
    let context = shared_context(insight, profile);
    let k = config.k_experts.max(1) as usize;

    let propose_prompt = format!(
        "{context}\nPropose the best chart for this insight. Reply with JSON: \
         {{\"chart_type\": \"...\", \"encodings\": {{\"x\": \"...\", \"y\": \"...\", \
         \"color\": \"...\", \"facet\": \"...\"}}, \"aggregate\": \"...\", \
         \"rationale\": \"...\"}}. Omit encoding channels and aggregate whenever the \
         rules require them absent."
    );
    let mut results: Vec<Option<Result<serde_json::Value, GatewayError>>> = Vec::new();
    results.resize_with(k, || None);
    std::thread::scope(|scope| {
        for (i, slot) in results.iter_mut().enumerate() {
            let request = ChatRequest::new(
                &config.model_id,
                vec![ChatMessage::system(persona(i + 1)), ChatMessage::user(&propose_prompt)],
                config.temperatures.experts,
            )
            .with_schema_tag(EXPERT_PROPOSAL_TAG);
            scope.spawn(move || {
                *slot = Some(gateway.complete_structured(&request, &PROPOSAL_SCHEMA));
            });
        }
    });
    let mut proposals = Vec::with_capacity(k);
    for (i, slot) in results.into_iter().enumerate() {
        let raw = slot.expect("expert thread completed")?;
        let d = parse_decision(&raw, profile);
        proposals.push(ExpertProposal {
            expert_id: i + 1,
            chart_type: d.chart_type,
            encodings: d.encodings,
            aggregate: d.aggregate,
            rationale: raw["rationale"].as_str().unwrap_or_default().to_string(),
        });
    }

    let unanimous = proposals.windows(2).all(|w| {
        w[0].chart_type == w[1].chart_type
            && w[0].encodings == w[1].encodings
            && w[0].aggregate == w[1].aggregate
    });
    if unanimous {
        let shared = &proposals[0];
        let problems =
            validate_plan(shared.chart_type, &shared.encodings, shared.aggregate, profile);
        if problems.is_empty() {
            let rationale = proposals
                .iter()
                .map(|p| format!("Expert {}: {}", p.expert_id, p.rationale))
                .collect::<Vec<_>>()
                .join("\n");
            return Ok(ChartPlan {
                insight_ref,
                chart_type: shared.chart_type,
                encodings: shared.encodings.clone(),
                aggregate: shared.aggregate,
                rationale,
                key_insight_narrative: insight.statement.clone(),
                annotations: Vec::new(),
            });
        }
        // A unanimously invalid proposal: the consensus call below doubles as
        // the one repair, briefed on the violations.
        return consensus(
            insight, insight_ref, profile, gateway, config, &context, &proposals,
            Some(&problems), false,
        );
    }
    consensus(insight, insight_ref, profile, gateway, config, &context, &proposals, None, true)
}

#[allow(clippy::too_many_arguments)]
fn consensus(
    insight: &Insight,
    insight_ref: InsightRef,
    profile: &TableProfile,
    gateway: &Gateway,
    config: &RunConfig,
    context: &str,
    proposals: &[ExpertProposal],
    prior_problems: Option<&[String]>,
    allow_repair: bool,
) -> Result<ChartPlan, PlanError> {
    let mut prompt = format!(
        "{context}\nA panel of {} experts proposed:\n{}\n",
        proposals.len(),
        proposal_lines(proposals)
    );
    if let Some(problems) = prior_problems {
        prompt.push_str(&format!(
            "\nThe shared proposal violates the rules:\n- {}\n",
            problems.join("\n- ")
        ));
    }
    prompt.push_str(
        "\nAs the panel moderator, debate the effectiveness of different chart types, \
         and scrutinize the selection of visual encodings. Then converge on one final \
         chart decision that satisfies every rule. Reply with JSON: {\"chart_type\": \
         \"...\", \"encodings\": {...}, \"aggregate\": \"...\", \"rationale\": \"...\", \
         \"key_insight_narrative\": \"...\", \"annotations\": [\"...\"]}. The \
         key_insight_narrative is the one sentence a dashboard reader should take away; \
         annotations are up to 3 short callouts to draw on the chart.",
    );
    let request = ChatRequest::new(
        &config.model_id,
        vec![
            ChatMessage::system("You moderate a panel of chart-design experts and produce its consensus."),
            ChatMessage::user(prompt),
        ],
        config.temperatures.experts,
    )
    .with_schema_tag(CHART_CONSENSUS_TAG);

    let raw = gateway.complete_structured(&request, &CONSENSUS_SCHEMA)?;
    let d = parse_decision(&raw, profile);
    let problems = validate_plan(d.chart_type, &d.encodings, d.aggregate, profile);
    let raw = if problems.is_empty() {
        raw
    } else if allow_repair {
        let mut repair = request.clone();
        repair.messages.push(ChatMessage::assistant(
            serde_json::to_string(&raw).expect("raw value serializes"),
        ));
        repair.messages.push(ChatMessage::user(format!(
            "That decision violates the rules:\n- {}\nRespond again with a single JSON \
             chart decision in the same shape that satisfies every rule.",
            problems.join("\n- ")
        )));
        let raw = gateway.complete_structured(&repair, &CONSENSUS_SCHEMA)?;
        let d = parse_decision(&raw, profile);
        let problems = validate_plan(d.chart_type, &d.encodings, d.aggregate, profile);
        if !problems.is_empty() {
            return Err(PlanError::Validation { problems });
        }
        raw
    } else {
        return Err(PlanError::Validation { problems });
    };

    let d = parse_decision(&raw, profile);
    let narrative = raw["key_insight_narrative"].as_str().unwrap_or_default().trim();
    let annotations: Vec<String> = raw["annotations"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|a| a.as_str())
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .take(MAX_ANNOTATIONS)
        .collect();
    Ok(ChartPlan {
        insight_ref,
        chart_type: d.chart_type,
        encodings: d.encodings,
        aggregate: d.aggregate,
        rationale: raw["rationale"].as_str().unwrap_or_default().to_string(),
        key_insight_narrative: if narrative.is_empty() {
            insight.statement.clone()
        } else {
            narrative.to_string()
        },
        annotations,
    })
}
