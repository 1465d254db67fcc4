//! Deterministic chart-grammar emission. Every plan expands through the same
//! layered template — no model involvement — and validates offline against
//! the vendored grammar schema, so legends, titles, and axis labels are
//! structurally guaranteed rather than hoped for.

use once_cell::sync::Lazy;
use serde_json::{json, Map, Value};

use crate::chart::{Aggregate, ChartPlan, ChartType};
use crate::profile::{ColumnProfile, InferredType, TableProfile};
use crate::render::data::{value_field, PreparedData};
use crate::util::{char_prefix, clip_with_ellipsis};

pub const VEGA_LITE_SCHEMA_URL: &str = "https://vega.github.io/schema/vega-lite/v5.json";
pub const CHART_WIDTH: u64 = 480;
pub const CHART_HEIGHT: u64 = 300;
pub const MAX_TITLE_CHARS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    /// Index into the plan list this spec was emitted from.
    pub plan_ref: usize,
    pub grammar_doc: Value,
    pub inline_data_rows: usize,
}

fn vl_type(t: InferredType) -> &'static str {
    match t {
        InferredType::Integer | InferredType::Decimal => "quantitative",
        InferredType::Datetime => "temporal",
        InferredType::Boolean | InferredType::Categorical | InferredType::Text => "nominal",
    }
}

fn axis_title(col: &ColumnProfile) -> String {
    match &col.detected_unit {
        Some(u) => format!("{} ({u})", col.name),
        None => col.name.clone(),
    }
}

fn clip_title(narrative: &str) -> String {
    if narrative.chars().count() > MAX_TITLE_CHARS {
        format!("{}…", char_prefix(narrative, MAX_TITLE_CHARS - 1))
    } else {
        narrative.to_string()
    }
}

struct ChannelCtx<'a> {
    plan: &'a ChartPlan,
    profile: &'a TableProfile,
}

impl ChannelCtx<'_> {
    fn col(&self, name: &str) -> &ColumnProfile {
        self.profile.column(name).expect("plan validated against profile")
    }

    /// Positional channel for a raw (non-aggregated) column.
    fn positional(&self, name: &str) -> Value {
        let col = self.col(name);
        json!({
            "field": col.name,
            "type": vl_type(col.inferred_type),
            "axis": {"title": axis_title(col)}
        })
    }

    /// The aggregated value channel ("count" or the measure column).
    fn measure(&self) -> Value {
        let field = value_field(self.plan).expect("aggregate present");
        let title = match self.plan.aggregate {
            Some(Aggregate::Count) => "count".to_string(),
            _ => axis_title(self.col(&field)),
        };
        json!({"field": field, "type": "quantitative", "axis": {"title": title}})
    }

    /// Explicit legend on every color channel — legends are never left to
    /// grammar defaults.
    fn color_nominal(&self, name: &str) -> Value {
        let col = self.col(name);
        json!({"field": col.name, "type": "nominal", "legend": {"title": col.name}})
    }
}

fn main_layer(plan: &ChartPlan, profile: &TableProfile) -> Value {
    let ctx = ChannelCtx { plan, profile };
    let enc = &plan.encodings;
    let aggregated = plan.aggregate.is_some();
    let mut encoding = Map::new();

    let mark = match plan.chart_type {
        ChartType::Bar | ChartType::StackedBar => "bar",
        ChartType::Line => "line",
        ChartType::Scatter => "point",
        ChartType::Box => "boxplot",
        ChartType::Heatmap => "rect",
        ChartType::Pie => "arc",
    };

    match plan.chart_type {
        ChartType::Bar | ChartType::StackedBar | ChartType::Line => {
            let x = enc.x.as_deref().expect("validated");
            encoding.insert("x".into(), ctx.positional(x));
            let y = if aggregated {
                ctx.measure()
            } else {
                ctx.positional(enc.y.as_deref().expect("validated"))
            };
            encoding.insert("y".into(), y);
            if let Some(c) = enc.color.as_deref() {
                encoding.insert("color".into(), ctx.color_nominal(c));
            }
        }
        ChartType::Scatter | ChartType::Box => {
            encoding.insert("x".into(), ctx.positional(enc.x.as_deref().expect("validated")));
            encoding.insert("y".into(), ctx.positional(enc.y.as_deref().expect("validated")));
            if let Some(c) = enc.color.as_deref() {
                encoding.insert("color".into(), ctx.color_nominal(c));
            }
        }
        ChartType::Heatmap => {
            encoding.insert("x".into(), ctx.positional(enc.x.as_deref().expect("validated")));
            encoding.insert("y".into(), ctx.positional(enc.y.as_deref().expect("validated")));
            let measure = enc.color.as_deref().expect("validated");
            let col = ctx.col(measure);
            encoding.insert(
                "color".into(),
                json!({
                    "field": col.name,
                    "type": "quantitative",
                    "legend": {"title": axis_title(col)}
                }),
            );
        }
        ChartType::Pie => {
            let mut theta = ctx.measure();
            theta.as_object_mut().unwrap().remove("axis"); // arcs have no axis
            encoding.insert("theta".into(), theta);
            encoding
                .insert("color".into(), ctx.color_nominal(enc.color.as_deref().expect("validated")));
        }
    }

    json!({"mark": {"type": mark}, "encoding": Value::Object(encoding)})
}

/// Annotations render as fixed-position text marks, one per line, pinned to a
/// single synthetic datum so each draws exactly once.
fn annotation_layers(annotations: &[String]) -> Vec<Value> {
    annotations
        .iter()
        .enumerate()
        .map(|(i, text)| {
            json!({
                "data": {"values": [{}]},
                "mark": {
                    "type": "text",
                    "align": "left",
                    "baseline": "top",
                    "x": 8,
                    "y": 8 + 16 * i as u64
                },
                "encoding": {"text": {"value": text}}
            })
        })
        .collect()
}

/// Pure template expansion of a validated plan plus its prepared rows.
pub fn emit_spec(
    plan: &ChartPlan,
    plan_ref: usize,
    data: &PreparedData,
    profile: &TableProfile,
) -> ChartSpec {
    let mut layers = vec![main_layer(plan, profile)];
    layers.extend(annotation_layers(&plan.annotations));

    let mut doc = Map::new();
    doc.insert("$schema".into(), json!(VEGA_LITE_SCHEMA_URL));
    doc.insert("title".into(), json!(clip_title(&plan.key_insight_narrative)));
    doc.insert("data".into(), json!({"values": data.rows}));
    match plan.encodings.facet.as_deref() {
        Some(facet) => {
            let col = profile.column(facet).expect("plan validated against profile");
            doc.insert(
                "facet".into(),
                json!({"field": col.name, "type": "nominal", "header": {"title": col.name}}),
            );
            doc.insert(
                "spec".into(),
                json!({"width": CHART_WIDTH, "height": CHART_HEIGHT, "layer": layers}),
            );
        }
        None => {
            doc.insert("width".into(), json!(CHART_WIDTH));
            doc.insert("height".into(), json!(CHART_HEIGHT));
            doc.insert("layer".into(), json!(layers));
        }
    }
    if data.sampled {
        doc.insert(
            "usermeta".into(),
            json!({"sampled": true, "inline_row_cap": crate::render::data::MAX_INLINE_ROWS}),
        );
    }

    ChartSpec { plan_ref, grammar_doc: Value::Object(doc), inline_data_rows: data.rows.len() }
}

/// Pinned grammar schema, vendored so validation needs no network.
static GRAMMAR_SCHEMA: Lazy<jsonschema::JSONSchema> = Lazy::new(|| {
    let raw: Value =
        serde_json::from_str(include_str!("../../assets/vega-lite-v5.21.0.json"))
            .expect("vendored grammar schema parses");
    jsonschema::JSONSchema::compile(&raw).expect("vendored grammar schema compiles")
});

/// Structural validation against the pinned grammar schema. Empty result
/// means valid; never panics or mutates.
pub fn validate_spec(doc: &Value) -> Vec<String> {
    match GRAMMAR_SCHEMA.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errors) => errors
            .map(|e| {
                let path = e.instance_path.to_string();
                let path = if path.is_empty() { "/".to_string() } else { path };
                format!("{path}: {}", clip_with_ellipsis(&e.to_string(), 200))
            })
            .collect(),
    }
}
