//! Dashboard rendering: aggregate plan data, expand plans into validated
//! chart-grammar documents, and assemble the final HTML page.

pub mod data;
pub mod emit;
pub mod html;

pub use data::{prepare_chart_data, AggregationError, PreparedData, MAX_INLINE_ROWS};
pub use emit::{emit_spec, validate_spec, ChartSpec};
pub use html::{assemble_dashboard, escape_html, Dashboard};
