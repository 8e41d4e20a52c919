//! Sankey documents, scenario overrides and β comparison tables.

mod sankey;
mod scenario;

pub use sankey::{
    biogenic_color, emit_sankey, SankeyDocument, SankeyLink, SankeyNode, BIOGENIC_GREEN, FOSSIL_GRAY, MIX_BLUE,
    NON_CARBON_YELLOW, PRODUCTION_BLUE,
};
pub use scenario::{compare, scenario_override, write_comparison_csv, ComparisonRow, Override, ScenarioError};
