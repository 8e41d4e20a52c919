use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use log::{debug, warn};
use serde::Serialize;
use thiserror::Error;

use super::simplex::{LinearProgram, SimplexError, Status, TOLERANCE};
use crate::atombill::MaterialAtomBill;
use crate::smiles::parse_molecule;
use crate::valuechain::{
    write_csv, Diagnostic, GraphError, InletAttributeTable, MixNodeId, ProductionNodeId, Role, ValueChainGraph,
};

/// One (node, material, substance, element) slot carrying a β per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttributeKey {
    Mix { node: MixNodeId, smiles: String, element: String },
    Production { node: ProductionNodeId, material: String, smiles: String, element: String },
}

impl AttributeKey {
    pub fn mix(node: MixNodeId, smiles: impl Into<String>, element: impl Into<String>) -> Self {
        AttributeKey::Mix { node, smiles: smiles.into(), element: element.into() }
    }

    pub fn production(
        node: ProductionNodeId,
        material: impl Into<String>,
        smiles: impl Into<String>,
        element: impl Into<String>,
    ) -> Self {
        AttributeKey::Production { node, material: material.into(), smiles: smiles.into(), element: element.into() }
    }

    pub fn smiles(&self) -> &str {
        match self {
            AttributeKey::Mix { smiles, .. } | AttributeKey::Production { smiles, .. } => smiles,
        }
    }

    pub fn element(&self) -> &str {
        match self {
            AttributeKey::Mix { element, .. } | AttributeKey::Production { element, .. } => element,
        }
    }

    pub fn is_production(&self) -> bool {
        matches!(self, AttributeKey::Production { .. })
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeKey::Mix { node, smiles, element } => write!(f, "{node}/{smiles}/{element}"),
            AttributeKey::Production { node, material, smiles, element } => {
                write!(f, "{node}/{material}/{smiles}/{element}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("inlet {node} supplies {smiles} but the inlet table has no {element} shares for it")]
    UncoveredInlet { node: MixNodeId, smiles: String, element: String },
    #[error("inlet table uses attribute {0}, which is not in the attribute set")]
    UnknownAttribute(String),
    #[error("atom bill given for {0}, which is not a production node of the graph")]
    UnknownNode(ProductionNodeId),
    #[error("cannot parse substance {0}")]
    Smiles(String),
    #[error("attribute set is empty")]
    NoAttributes,
}

/// Which element-bearing slots exist: reachable forward from the inlets.
#[derive(Debug, Clone, Default)]
pub(crate) struct KeySpace {
    pub inlet: BTreeSet<AttributeKey>,
    pub keys: BTreeSet<AttributeKey>,
}

pub(crate) struct ElementCache(HashMap<String, BTreeSet<String>>);

impl ElementCache {
    pub fn new() -> Self {
        Self(HashMap::new())
    }

    pub fn contains(&mut self, smiles: &str, element: &str) -> Result<bool, BuildError> {
        if !self.0.contains_key(smiles) {
            let m = parse_molecule(smiles).map_err(|_| BuildError::Smiles(smiles.to_string()))?;
            self.0.insert(smiles.to_string(), m.element_counts.keys().cloned().collect());
        }
        Ok(self.0[smiles].contains(element))
    }
}

fn discover(
    graph: &ValueChainGraph,
    inlets: &InletAttributeTable,
    elements: &[String],
    cache: &mut ElementCache,
) -> Result<KeySpace, BuildError> {
    let mut space = KeySpace::default();
    let inlet_nodes = graph.inlet_nodes();
    for d in &inlet_nodes {
        for s in graph.mix_substances(d) {
            for e in elements {
                if !cache.contains(&s, e)? {
                    continue;
                }
                if inlets.get(d, &s, e).is_none() {
                    return Err(BuildError::UncoveredInlet { node: d.clone(), smiles: s.clone(), element: e.clone() });
                }
                let key = AttributeKey::mix(d.clone(), s.clone(), e.clone());
                space.inlet.insert(key.clone());
                space.keys.insert(key);
            }
        }
    }

    loop {
        let before = space.keys.len();
        for (t, bill) in graph.bills() {
            for e in elements {
                let active = bill.substances.iter().filter(|s| s.role == Role::Reactant).any(|s| {
                    space.keys.contains(&AttributeKey::mix(t.supply(&s.material), s.smiles.clone(), e.clone()))
                });
                if !active {
                    continue;
                }
                for s in bill.substances.iter().filter(|s| s.role == Role::Product) {
                    if cache.contains(&s.smiles, e)? {
                        space.keys.insert(AttributeKey::production(t.clone(), &s.material, &s.smiles, e.clone()));
                    }
                }
            }
        }
        for d in graph.mix_nodes() {
            if inlet_nodes.contains(d) {
                continue;
            }
            for (t, _) in graph.mu_sources(d) {
                let Some(bill) = graph.bill(t) else { continue };
                for s in bill.substances_of(Role::Product, &d.product) {
                    for e in elements {
                        let src = AttributeKey::production(t.clone(), &d.product, &s.smiles, e.clone());
                        if space.keys.contains(&src) {
                            space.keys.insert(AttributeKey::mix(d.clone(), &s.smiles, e.clone()));
                        }
                    }
                }
            }
        }
        if space.keys.len() == before {
            break;
        }
    }
    Ok(space)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Production,
    Mix,
    Normalization,
}

#[derive(Debug, Clone)]
struct RowInfo {
    kind: RowKind,
    key: usize,
    attribute: Option<usize>,
}

/// The slack-minimizing attribute LP over a whole value chain.
#[derive(Debug, Clone)]
pub struct AttributeLP {
    pub program: LinearProgram,
    pub attributes: Vec<String>,
    pub keys: Vec<AttributeKey>,
    beta: Vec<Vec<usize>>,
    slack: Vec<(usize, usize)>,
    inlet: Vec<bool>,
    rows: Vec<RowInfo>,
    names: Vec<String>,
    /// Data gaps found while building (unmapped outputs, partial maps).
    pub diagnostics: Vec<Diagnostic>,
}

pub fn build_lp(
    graph: &ValueChainGraph,
    psi: &BTreeMap<ProductionNodeId, MaterialAtomBill>,
    inlets: &InletAttributeTable,
    attributes: &[String],
    elements: &[String],
) -> Result<AttributeLP, BuildError> {
    if attributes.is_empty() {
        return Err(BuildError::NoAttributes);
    }
    for shares in inlets.entries().values() {
        if let Some(a) = shares.keys().find(|a| !attributes.contains(a)) {
            return Err(BuildError::UnknownAttribute(a.clone()));
        }
    }
    if let Some(t) = psi.keys().find(|t| graph.bill(t).is_none()) {
        return Err(BuildError::UnknownNode(t.clone()));
    }
    let mut cache = ElementCache::new();
    let space = discover(graph, inlets, elements, &mut cache)?;

    let mut lp = AttributeLP {
        program: LinearProgram::new(),
        attributes: attributes.to_vec(),
        keys: space.keys.iter().cloned().collect(),
        beta: Vec::new(),
        slack: Vec::new(),
        inlet: Vec::new(),
        rows: Vec::new(),
        names: Vec::new(),
        diagnostics: Vec::new(),
    };
    let index: HashMap<&AttributeKey, usize> = lp.keys.iter().enumerate().map(|(i, k)| (k, i)).collect();

    for key in &space.keys {
        let fixed = space.inlet.contains(key);
        let mut vars = Vec::with_capacity(attributes.len());
        for a in attributes {
            let var = if fixed {
                let AttributeKey::Mix { node, smiles, element } = key else { unreachable!("inlets are mix keys") };
                let h = inlets.share(node, smiles, element, a).unwrap_or(0.0);
                lp.program.add_variable(0.0, h, h)
            } else {
                lp.program.add_variable(0.0, 0.0, 1.0)
            };
            lp.names.push(format!("b[{key}|{a}]"));
            vars.push(var);
        }
        lp.beta.push(vars);
        let z = lp.program.add_variable(1.0, 0.0, f64::INFINITY);
        lp.names.push(format!("z[{key}]"));
        let q = lp.program.add_variable(1.0, 0.0, f64::INFINITY);
        lp.names.push(format!("q[{key}]"));
        lp.slack.push((z, q));
        lp.inlet.push(fixed);
    }

    let empty = MaterialAtomBill::default();
    for (k, key) in lp.keys.iter().enumerate() {
        match key {
            AttributeKey::Production { node, material, smiles, element } => {
                let bill = psi.get(node).unwrap_or(&empty);
                let rows: Vec<_> = bill
                    .rows
                    .iter()
                    .filter(|r| r.product_material == *material && r.product_smiles == *smiles && r.element == *element)
                    .collect();
                let total: f64 = rows.iter().map(|r| r.share).sum();
                if rows.is_empty() {
                    lp.diagnostics.push(Diagnostic::warning(
                        "unmapped-output",
                        key,
                        "no atom-bill row traces this output; only slack can balance it",
                    ));
                } else if total < 1.0 - 1e-9 {
                    lp.diagnostics.push(
                        Diagnostic::warning("partial-mapping", key, "atom-bill shares sum below 1").with_value(total),
                    );
                }
                for (ai, _) in attributes.iter().enumerate() {
                    let mut coeffs = vec![(lp.beta[k][ai], 1.0)];
                    for r in &rows {
                        let src = AttributeKey::mix(node.supply(&r.reactant_material), &r.reactant_smiles, element);
                        if let Some(&si) = index.get(&src) {
                            coeffs.push((lp.beta[si][ai], -r.share));
                        }
                    }
                    lp.program.add_constraint(coeffs, 0.0);
                    lp.rows.push(RowInfo { kind: RowKind::Production, key: k, attribute: Some(ai) });
                }
            }
            AttributeKey::Mix { node, smiles, element } => {
                if lp.inlet[k] {
                    continue;
                }
                let sources = graph.mu_sources(node);
                for (ai, _) in attributes.iter().enumerate() {
                    let mut coeffs = vec![(lp.beta[k][ai], 1.0)];
                    for (t, mu) in &sources {
                        let src = AttributeKey::production((*t).clone(), &node.product, smiles, element);
                        if let Some(&si) = index.get(&src) {
                            coeffs.push((lp.beta[si][ai], -mu));
                        }
                    }
                    lp.program.add_constraint(coeffs, 0.0);
                    lp.rows.push(RowInfo { kind: RowKind::Mix, key: k, attribute: Some(ai) });
                }
            }
        }
    }
    for k in 0..lp.keys.len() {
        let (z, q) = lp.slack[k];
        let mut coeffs: Vec<(usize, f64)> = lp.beta[k].iter().map(|&v| (v, 1.0)).collect();
        coeffs.push((z, -1.0));
        coeffs.push((q, 1.0));
        lp.program.add_constraint(coeffs, 1.0);
        lp.rows.push(RowInfo { kind: RowKind::Normalization, key: k, attribute: None });
    }
    for d in &lp.diagnostics {
        warn!("{d}");
    }
    debug!(
        "attribute LP: {} keys, {} variables, {} constraints",
        lp.keys.len(),
        lp.program.num_variables(),
        lp.program.num_constraints()
    );
    Ok(lp)
}

impl AttributeLP {
    pub fn num_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn inlet_keys(&self) -> impl Iterator<Item = &AttributeKey> {
        self.keys.iter().zip(&self.inlet).filter(|(_, i)| **i).map(|(k, _)| k)
    }

    /// Plain-text listing, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "minimize sum(z + q)");
        for (i, info) in self.rows.iter().enumerate() {
            let (coeffs, rhs) = self.program.row(i);
            let label = match info.kind {
                RowKind::Production => "production",
                RowKind::Mix => "mix",
                RowKind::Normalization => "normalize",
            };
            let mut line = match info.attribute {
                Some(a) => format!("{label}[{}|{}]: ", self.keys[info.key], self.attributes[a]),
                None => format!("{label}[{}]: ", self.keys[info.key]),
            };
            for (n, (j, a)) in coeffs.iter().enumerate() {
                let sign = if *a < 0.0 { "-" } else if n > 0 { "+" } else { "" };
                let mag = a.abs();
                if n > 0 {
                    line.push(' ');
                }
                if mag == 1.0 {
                    let _ = write!(line, "{sign}{}", self.names[*j]);
                } else {
                    let _ = write!(line, "{sign}{mag}*{}", self.names[*j]);
                }
            }
            let _ = writeln!(out, "{line} = {rhs}");
        }
        for (k, key) in self.keys.iter().enumerate() {
            if self.inlet[k] {
                for (ai, a) in self.attributes.iter().enumerate() {
                    let _ = writeln!(out, "fixed: b[{key}|{a}] = {}", self.program.bounds(self.beta[k][ai]).0);
                }
            }
        }
        out
    }

    pub fn solve(&self) -> Result<AttributeSolution, SimplexError> {
        let sol = self.program.solve()?;
        let mut beta = BTreeMap::new();
        let mut slack = BTreeMap::new();
        for (k, key) in self.keys.iter().enumerate() {
            beta.insert(key.clone(), self.beta[k].iter().map(|&v| sol.x[v]).collect::<Vec<_>>());
            let (z, q) = self.slack[k];
            slack.insert(key.clone(), (sol.x[z], -sol.x[q]));
        }
        Ok(AttributeSolution {
            attributes: self.attributes.clone(),
            beta,
            slack,
            total_slack: sol.objective,
            status: sol.status,
            max_residual: sol.max_residual,
            iterations: sol.iterations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSolution {
    pub attributes: Vec<String>,
    pub beta: BTreeMap<AttributeKey, Vec<f64>>,
    /// (z ≥ 0, q ≤ 0) per normalization constraint.
    pub slack: BTreeMap<AttributeKey, (f64, f64)>,
    pub total_slack: f64,
    pub status: Status,
    pub max_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackEntry {
    #[serde(skip)]
    pub key: AttributeKey,
    pub location: String,
    pub z: f64,
    pub q: f64,
    pub magnitude: f64,
}

#[derive(Debug, Serialize)]
struct BetaRecord<'a> {
    node_type: &'a str,
    c: &'a str,
    b: &'a str,
    g: &'a str,
    p: &'a str,
    smiles: &'a str,
    element: &'a str,
    attribute: &'a str,
    share: f64,
}

#[derive(Debug, Serialize)]
struct SlackRecord<'a> {
    node_type: &'a str,
    c: &'a str,
    b: &'a str,
    g: &'a str,
    p: &'a str,
    smiles: &'a str,
    element: &'a str,
    z: f64,
    q: f64,
    magnitude: f64,
}

fn key_columns(key: &AttributeKey) -> (&str, &str, &str, &str, &str, &str, &str) {
    match key {
        AttributeKey::Mix { node, smiles, element } => ("mix", &node.company, "", "", &node.product, smiles, element),
        AttributeKey::Production { node, material, smiles, element } => {
            ("production", &node.company, &node.process, &node.main_product, material, smiles, element)
        }
    }
}

/// Signed zero is printed as 0 so outputs stay byte-stable.
fn clean(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl AttributeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn attribute_index(&self, attribute: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == attribute)
    }

    pub fn share(&self, key: &AttributeKey, attribute: &str) -> Option<f64> {
        let i = self.attribute_index(attribute)?;
        self.beta.get(key).map(|v| v[i])
    }

    /// Normalization constraints with nonzero slack, largest first.
    pub fn slack_report(&self) -> Vec<SlackEntry> {
        let mut out: Vec<SlackEntry> = self
            .slack
            .iter()
            .filter(|(_, (z, q))| z.abs() + q.abs() > TOLERANCE)
            .map(|(key, (z, q))| SlackEntry {
                key: key.clone(),
                location: key.to_string(),
                z: *z,
                q: *q,
                magnitude: z.abs() + q.abs(),
            })
            .collect();
        out.sort_by(|a, b| {
            b.magnitude
                .total_cmp(&a.magnitude)
                .then(b.key.is_production().cmp(&a.key.is_production()))
                .then(a.key.cmp(&b.key))
        });
        out
    }

    pub fn write_beta_csv(&self, path: &Path) -> Result<(), GraphError> {
        let mut rows = Vec::new();
        for (key, values) in &self.beta {
            let (node_type, c, b, g, p, smiles, element) = key_columns(key);
            for (a, v) in self.attributes.iter().zip(values) {
                rows.push(BetaRecord { node_type, c, b, g, p, smiles, element, attribute: a, share: clean(*v) });
            }
        }
        write_csv(path, &rows)
    }

    pub fn write_slack_csv(&self, path: &Path) -> Result<(), GraphError> {
        let report = self.slack_report();
        let rows: Vec<SlackRecord> = report
            .iter()
            .map(|e| {
                let (node_type, c, b, g, p, smiles, element) = key_columns(&e.key);
                SlackRecord { node_type, c, b, g, p, smiles, element, z: clean(e.z), q: clean(e.q), magnitude: e.magnitude }
            })
            .collect();
        if rows.is_empty() {
            std::fs::write(path, "node_type,c,b,g,p,smiles,element,z,q,magnitude\n")
                .map_err(|e| GraphError::io(path, e))
        } else {
            write_csv(path, &rows)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let beta: Vec<serde_json::Value> = self
            .beta
            .iter()
            .map(|(key, values)| {
                let (node_type, c, b, g, p, smiles, element) = key_columns(key);
                let shares: serde_json::Map<String, serde_json::Value> =
                    self.attributes.iter().zip(values).map(|(a, v)| (a.clone(), clean(*v).into())).collect();
                serde_json::json!({
                    "node_type": node_type, "c": c, "b": b, "g": g, "p": p,
                    "smiles": smiles, "element": element, "shares": shares,
                })
            })
            .collect();
        serde_json::json!({
            "status": self.status.to_string(),
            "total_slack": clean(self.total_slack),
            "max_residual": self.max_residual,
            "attributes": self.attributes,
            "beta": beta,
            "slack": self.slack_report(),
        })
    }
}
