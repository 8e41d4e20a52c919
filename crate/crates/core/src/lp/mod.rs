//! Attribute propagation as a slack-minimizing LP, plus a fixed-point oracle.

mod model;
mod oracle;
pub mod simplex;

pub use model::{build_lp, AttributeKey, AttributeLP, AttributeSolution, BuildError, SlackEntry};
pub use oracle::{fixed_point_oracle, OracleResult, ORACLE_MAX_SWEEPS, ORACLE_TOLERANCE};
pub use simplex::{LinearProgram, LpSolution, SimplexError, Status};
