//! Atom-level attribute tracing (e.g. biogenic vs. fossil carbon) through
//! chemical value chains.

pub mod atombill;
pub mod lp;
pub mod pipeline;
pub mod report;
pub mod smiles;
pub mod synth;
pub mod valuechain;

pub use atombill::{
    derive_phi, derive_psi, FileProvider, HttpProvider, MappingCache, MappingProvider, MaterialAtomBill,
    SubstanceAtomBill,
};
pub use lp::{build_lp, fixed_point_oracle, AttributeKey, AttributeLP, AttributeSolution, OracleResult, Status};
pub use pipeline::{trace, Trace, TraceOptions};
pub use report::{emit_sankey, scenario_override, Override, SankeyDocument};
pub use smiles::{molar_mass, parse_molecule, parse_reaction, Molecule, Reaction};
pub use valuechain::{
    load_graph, Diagnostic, InletAttributeTable, LoadOptions, MixNodeId, ProductionNodeId, Role, ValueChainGraph,
};
