//! Every emitted grammar doc must validate against the vendored chart-grammar
//! schema, across all seven chart types under randomized valid plans, and
//! legends must appear exactly when a plan encodes color. Plans are generated
//! from the bundled marketing sample so the column-type pools mirror real
//! pipeline output.

use d2d_core::chart::{validate_plan, Aggregate, ChartPlan, ChartType, Encodings, InsightRef};
use d2d_core::insight::Lens;
use d2d_core::profile::{build_profile, ProfileConfig, TableProfile, TypedTable};
use d2d_core::render::{emit_spec, prepare_chart_data, validate_spec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

const CAT_COLS: [&str; 4] = ["channel", "channel_code", "region", "active"];
const NUM_COLS: [&str; 3] = ["monthly_spend", "orders", "satisfaction"];
const TIME_COL: &str = "signup_date";

fn fixture() -> (TypedTable, TableProfile) {
    let csv = crate::common::read_to_string(&crate::common::workspace_path("samples/marketing.csv"));
    let typed = crate::table_from_csv(&csv);
    let profile = build_profile(&typed, &ProfileConfig::default());
    (typed, profile)
}

fn pick<'a>(rng: &mut StdRng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn maybe<'a>(rng: &mut StdRng, pool: &[&'a str]) -> Option<&'a str> {
    rng.gen_bool(0.5).then(|| pick(rng, pool))
}

/// Aggregate and matching y for the bar/line/pie measure rule: count takes no
/// y, every other aggregate (or no aggregate at all) takes a numeric y.
fn measure_and_y(rng: &mut StdRng, allow_raw: bool) -> (Option<Aggregate>, Option<&'static str>) {
    let options: &[Option<Aggregate>] = if allow_raw {
        &[None, Some(Aggregate::Count), Some(Aggregate::Sum), Some(Aggregate::Mean), Some(Aggregate::Median)]
    } else {
        &[Some(Aggregate::Count), Some(Aggregate::Sum), Some(Aggregate::Mean), Some(Aggregate::Median)]
    };
    let agg = options[rng.gen_range(0..options.len())];
    let y = match agg {
        Some(Aggregate::Count) => None,
        _ => Some(pick(rng, &NUM_COLS)),
    };
    (agg, y)
}

fn random_valid_plan(rng: &mut StdRng, chart_type: ChartType) -> ChartPlan {
    let (x, y, color, facet, aggregate) = match chart_type {
        ChartType::Bar => {
            let x_pool: Vec<&str> = CAT_COLS.iter().copied().chain([TIME_COL]).collect();
            let (agg, y) = measure_and_y(rng, true);
            (Some(pick(rng, &x_pool)), y, None, maybe(rng, &CAT_COLS), agg)
        }
        ChartType::StackedBar => {
            let x_pool: Vec<&str> = CAT_COLS.iter().copied().chain([TIME_COL]).collect();
            let (agg, y) = measure_and_y(rng, true);
            (Some(pick(rng, &x_pool)), y, Some(pick(rng, &CAT_COLS)), maybe(rng, &CAT_COLS), agg)
        }
        ChartType::Line => {
            let x_pool: Vec<&str> = NUM_COLS.iter().copied().chain([TIME_COL]).collect();
            let (agg, y) = measure_and_y(rng, true);
            (Some(pick(rng, &x_pool)), y, maybe(rng, &CAT_COLS), maybe(rng, &CAT_COLS), agg)
        }
        ChartType::Scatter => (
            Some(pick(rng, &NUM_COLS)),
            Some(pick(rng, &NUM_COLS)),
            maybe(rng, &CAT_COLS),
            maybe(rng, &CAT_COLS),
            None,
        ),
        ChartType::Box => (
            Some(pick(rng, &CAT_COLS)),
            Some(pick(rng, &NUM_COLS)),
            None,
            maybe(rng, &CAT_COLS),
            None,
        ),
        ChartType::Heatmap => {
            let aggs = [Aggregate::Sum, Aggregate::Mean, Aggregate::Median];
            (
                Some(pick(rng, &CAT_COLS)),
                Some(pick(rng, &CAT_COLS)),
                Some(pick(rng, &NUM_COLS)),
                None,
                Some(aggs[rng.gen_range(0..aggs.len())]),
            )
        }
        ChartType::Pie => {
            let (agg, y) = measure_and_y(rng, false);
            (None, y, Some(pick(rng, &CAT_COLS)), None, agg)
        }
    };
    let narrative_len = rng.gen_range(5..140usize);
    let annotations = (0..rng.gen_range(0..3usize))
        .map(|i| format!("annotation line {i}"))
        .collect();
    ChartPlan {
        insight_ref: InsightRef { lens: Lens::Descriptive, index: 0 },
        chart_type,
        encodings: Encodings {
            x: x.map(String::from),
            y: y.map(String::from),
            color: color.map(String::from),
            facet: facet.map(String::from),
        },
        aggregate,
        rationale: "r".into(),
        key_insight_narrative: "n".repeat(narrative_len),
        annotations,
    }
}

fn count_legends(v: &Value) -> usize {
    match v {
        Value::Object(m) => {
            m.iter().map(|(k, v)| usize::from(k == "legend") + count_legends(v)).sum()
        }
        Value::Array(a) => a.iter().map(count_legends).sum(),
        _ => 0,
    }
}

#[test]
fn criterion_5_grammar_docs_validate_and_obey_legend_law() {
    let (typed, profile) = fixture();
    // The pools assume the sample's inferred column types; pin them.
    use d2d_core::profile::InferredType::*;
    for (name, expect) in [
        ("channel", Categorical),
        ("region", Categorical),
        ("active", Boolean),
        ("orders", Integer),
        ("monthly_spend", Decimal),
        ("signup_date", Datetime),
    ] {
        assert_eq!(profile.column(name).unwrap().inferred_type, expect, "{name}");
    }

    let mut rng = StdRng::seed_from_u64(0xD2D_0005);
    let mut with_color = 0usize;
    let mut without_color = 0usize;
    for chart_type in ChartType::ALL {
        for trial in 0..30 {
            let plan = random_valid_plan(&mut rng, chart_type);
            let problems =
                validate_plan(plan.chart_type, &plan.encodings, plan.aggregate, &profile);
            assert!(
                problems.is_empty(),
                "{chart_type:?} trial {trial}: generator built an invalid plan {plan:?}: {problems:?}"
            );

            let data = prepare_chart_data(&typed, &plan, 17)
                .unwrap_or_else(|e| panic!("{chart_type:?} trial {trial}: {e}"));
            let spec = emit_spec(&plan, trial, &data, &profile);
            let doc = &spec.grammar_doc;

            let errors = validate_spec(doc);
            assert!(
                errors.is_empty(),
                "{chart_type:?} trial {trial}: schema-invalid doc\nerrors: {errors:#?}\nplan: {plan:?}\ndoc: {doc}"
            );

            assert_eq!(doc["$schema"], "https://vega.github.io/schema/vega-lite/v5.json");
            assert!(doc["title"].is_string(), "{chart_type:?}: title present");
            assert_eq!(spec.plan_ref, trial);
            assert!(spec.inline_data_rows >= 1, "{chart_type:?}: rows inlined");

            // Legend law: exactly one legend when the plan encodes color,
            // none otherwise — never left to grammar defaults.
            let legends = count_legends(doc);
            if plan.encodings.color.is_some() {
                with_color += 1;
                assert_eq!(
                    legends, 1,
                    "{chart_type:?} trial {trial}: color plan must carry exactly one legend\n{doc}"
                );
            } else {
                without_color += 1;
                assert_eq!(
                    legends, 0,
                    "{chart_type:?} trial {trial}: colorless plan must carry no legend\n{doc}"
                );
            }
        }
    }
    // 210 plans total; both sides of the law must be well represented.
    assert!(with_color >= 60, "plans with color: {with_color}");
    assert!(without_color >= 60, "plans without color: {without_color}");
}
