//! Single-file dashboard assembly. The page is self-contained except for
//! pinned CDN runtime scripts; every chart spec is embedded as JSON and
//! hydrated client-side.

use std::fmt::Write as _;

use crate::chart::ChartPlan;
use crate::insight::InsightBundle;
use crate::render::emit::ChartSpec;
use crate::semantics::DomainFinding;

pub const VEGA_CDN: &str = "https://cdn.jsdelivr.net/npm/vega@5.30.0";
pub const VEGA_LITE_CDN: &str = "https://cdn.jsdelivr.net/npm/vega-lite@5.21.0";
pub const VEGA_EMBED_CDN: &str = "https://cdn.jsdelivr.net/npm/vega-embed@6.26.0";

#[derive(Debug, Clone)]
pub struct Dashboard {
    pub html: String,
    pub chart_count: usize,
    pub domain_header: String,
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(ch),
        }
    }
    out
}

/// `</script>` inside embedded JSON would terminate the carrier tag early;
/// escaping every `</` keeps the payload inert while `JSON.parse` still sees
/// the original text.
fn escape_json_for_script(json: &str) -> String {
    json.replace("</", "<\\/")
}

const PAGE_STYLE: &str = "\
body { font-family: system-ui, sans-serif; margin: 0; background: #fafafa; color: #1a1a1a; }\n\
header { background: #1f2937; color: #f9fafb; padding: 24px 32px; }\n\
header h1 { margin: 0 0 8px; font-size: 1.5rem; }\n\
header p { margin: 0; color: #d1d5db; max-width: 70ch; }\n\
main { padding: 24px 32px; display: grid; gap: 24px; }\n\
section.chart { background: #fff; border: 1px solid #e5e7eb; border-radius: 8px; padding: 16px; }\n\
section.chart p.narrative { font-weight: 600; margin: 0 0 12px; }\n\
section.chart ul.annotations { margin: 12px 0 0; padding-left: 20px; color: #4b5563; }\n\
footer { padding: 16px 32px; color: #6b7280; font-size: 0.85rem; border-top: 1px solid #e5e7eb; }\n";

/// Assembles the final page from emitted specs plus the narrative context
/// they came from. `run_digest` is stamped into the footer so a rendered page
/// can be traced back to the exact run that produced it.
pub fn assemble_dashboard(
    specs: &[ChartSpec],
    bundle: &InsightBundle,
    domain: &DomainFinding,
    plans: &[ChartPlan],
    run_digest: &str,
) -> Dashboard {
    let domain_header = domain.label.clone();
    let mut html = String::new();

    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n\
         <title>{} dashboard</title>\n\
         <script src=\"{VEGA_CDN}\"></script>\n\
         <script src=\"{VEGA_LITE_CDN}\"></script>\n\
         <script src=\"{VEGA_EMBED_CDN}\"></script>\n\
         <style>\n{PAGE_STYLE}</style>\n</head>\n<body>\n",
        escape_html(&domain.label)
    );

    let _ = write!(
        html,
        "<header>\n<h1>{}</h1>\n<p>{}</p>\n</header>\n<main>\n",
        escape_html(&domain.label),
        escape_html(&domain.definition)
    );

    for (i, spec) in specs.iter().enumerate() {
        let plan = &plans[spec.plan_ref];
        // The plan's source insight, when the reference still resolves.
        let statement = bundle
            .bucket(plan.insight_ref.lens)
            .get(plan.insight_ref.index)
            .map(|ins| ins.statement.as_str())
            .unwrap_or(&plan.key_insight_narrative);

        let _ = write!(
            html,
            "<section class=\"chart\" id=\"chart-{i}\">\n\
             <p class=\"narrative\">{}</p>\n\
             <div class=\"chart-container\" id=\"view-{i}\"></div>\n",
            escape_html(statement)
        );

        if !plan.annotations.is_empty() {
            html.push_str("<ul class=\"annotations\">\n");
            for note in &plan.annotations {
                let _ = write!(html, "<li>{}</li>\n", escape_html(note));
            }
            html.push_str("</ul>\n");
        }

        let spec_json = serde_json::to_string(&spec.grammar_doc).expect("spec serializes");
        let _ = write!(
            html,
            "<script type=\"application/json\" id=\"spec-{i}\">{}</script>\n</section>\n",
            escape_json_for_script(&spec_json)
        );
    }

    html.push_str("</main>\n<script>\n");
    for i in 0..specs.len() {
        let _ = write!(
            html,
            "vegaEmbed('#view-{i}', JSON.parse(document.getElementById('spec-{i}').textContent), {{actions: false}});\n"
        );
    }
    let _ = write!(
        html,
        "</script>\n<footer>Run digest: {}</footer>\n</body>\n</html>\n",
        escape_html(run_digest)
    );

    Dashboard { html, chart_count: specs.len(), domain_header }
}
