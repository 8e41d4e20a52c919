use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::lp::{AttributeKey, AttributeSolution};
use crate::valuechain::{write_csv, GraphError, InletAttributeTable, InletError, MixNodeId, ValueChainGraph};

/// Set one attribute's share for a substance at an inlet node. Other
/// attributes are rescaled so the shares still sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub node: MixNodeId,
    pub smiles: String,
    pub attribute: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("override must be c,p,smiles,attribute,share; got {0:?}")]
    Syntax(String),
    #[error("{0} is not an inlet node")]
    NotInlet(MixNodeId),
    #[error("{node} does not supply {smiles}")]
    UnknownSubstance { node: MixNodeId, smiles: String },
    #[error("override share {0} outside [0, 1]")]
    ShareRange(f64),
    #[error("{node} {smiles}: no other attribute can take the remaining share {rest}")]
    NoRemainder { node: MixNodeId, smiles: String, rest: f64 },
    #[error(transparent)]
    Table(#[from] InletError),
}

impl FromStr for Override {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [c, p, smiles, attribute, share] = parts.as_slice() else {
            return Err(ScenarioError::Syntax(s.to_string()));
        };
        if c.is_empty() || p.is_empty() || smiles.is_empty() || attribute.is_empty() {
            return Err(ScenarioError::Syntax(s.to_string()));
        }
        let share: f64 = share.parse().map_err(|_| ScenarioError::Syntax(s.to_string()))?;
        Ok(Override { node: MixNodeId::new(*c, *p), smiles: smiles.to_string(), attribute: attribute.to_string(), share })
    }
}

/// New inlet table with the overrides applied in order; `inlets` is untouched.
/// An override touches every element entry of its (node, smiles); with none
/// present it creates a carbon entry.
pub fn scenario_override(
    graph: &ValueChainGraph,
    inlets: &InletAttributeTable,
    overrides: &[Override],
) -> Result<InletAttributeTable, ScenarioError> {
    let sources = graph.inlet_nodes();
    let mut rows = inlets.entries().clone();
    for o in overrides {
        if !(0.0..=1.0).contains(&o.share) {
            return Err(ScenarioError::ShareRange(o.share));
        }
        if !sources.contains(&o.node) {
            return Err(ScenarioError::NotInlet(o.node.clone()));
        }
        if !graph.mix_substances(&o.node).contains(&o.smiles) {
            return Err(ScenarioError::UnknownSubstance { node: o.node.clone(), smiles: o.smiles.clone() });
        }
        let mut targets: Vec<_> =
            rows.keys().filter(|(d, s, _)| *d == o.node && *s == o.smiles).cloned().collect();
        if targets.is_empty() {
            let key = (o.node.clone(), o.smiles.clone(), "C".to_string());
            rows.insert(key.clone(), BTreeMap::new());
            targets.push(key);
        }
        for key in targets {
            let shares = rows.get_mut(&key).expect("key taken from map");
            let rest = 1.0 - o.share;
            let others: f64 = shares.iter().filter(|(a, _)| **a != o.attribute).map(|(_, v)| v).sum();
            if others > 0.0 {
                for (a, v) in shares.iter_mut() {
                    if *a != o.attribute {
                        *v *= rest / others;
                    }
                }
            } else if rest > 1e-12 {
                return Err(ScenarioError::NoRemainder { node: o.node.clone(), smiles: o.smiles.clone(), rest });
            }
            shares.insert(o.attribute.clone(), o.share);
        }
    }
    Ok(InletAttributeTable::from_map(rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub location: String,
    pub attribute: String,
    pub base: Option<f64>,
    pub scenario: Option<f64>,
    pub delta: Option<f64>,
}

/// Side-by-side β for every key in either solution.
pub fn compare(base: &AttributeSolution, scenario: &AttributeSolution) -> Vec<ComparisonRow> {
    let keys: std::collections::BTreeSet<&AttributeKey> = base.beta.keys().chain(scenario.beta.keys()).collect();
    let mut attributes = base.attributes.clone();
    for a in &scenario.attributes {
        if !attributes.contains(a) {
            attributes.push(a.clone());
        }
    }
    let mut out = Vec::new();
    for key in keys {
        for a in &attributes {
            let b = base.share(key, a);
            let s = scenario.share(key, a);
            let delta = match (b, s) {
                (Some(b), Some(s)) => Some(s - b),
                _ => None,
            };
            out.push(ComparisonRow {
                location: key.to_string(),
                attribute: a.clone(),
                base: b,
                scenario: s,
                delta,
            });
        }
    }
    out
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<(), GraphError> {
    write_csv(path, rows)
}
