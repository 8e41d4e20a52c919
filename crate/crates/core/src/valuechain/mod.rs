//! Bipartite value-chain graph: mix nodes (c,p) and production nodes (c,b,g),
//! α edges from mix to production and μ edges from production to mix.

mod inlet;
mod records;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles::parse_molecule;

pub use inlet::{InletAttributeTable, InletError, InletKey};
pub use records::{read_csv, write_csv, BomRecord, BosRecord, Bundle, InletRecord, MixRecord};

/// Tolerance on Σμ = 1 after ingest.
pub const MU_SUM_TOLERANCE: f64 = 1e-9;
/// Raw μ sums this close to 1 are rescaled on ingest.
pub const MU_NORMALIZE_WINDOW: f64 = 1e-3;
pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MixNodeId {
    pub company: String,
    pub product: String,
}

impl MixNodeId {
    pub fn new(company: impl Into<String>, product: impl Into<String>) -> Self {
        Self { company: company.into(), product: product.into() }
    }
}

impl fmt::Display for MixNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d:{}|{}", self.company, self.product)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductionNodeId {
    pub company: String,
    pub process: String,
    pub main_product: String,
}

impl ProductionNodeId {
    pub fn new(company: impl Into<String>, process: impl Into<String>, main_product: impl Into<String>) -> Self {
        Self { company: company.into(), process: process.into(), main_product: main_product.into() }
    }

    /// Mix node a reactant material of this node is drawn from.
    pub fn supply(&self, material: &str) -> MixNodeId {
        MixNodeId::new(self.company.clone(), material)
    }
}

impl fmt::Display for ProductionNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t:{}|{}|{}", self.company, self.process, self.main_product)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Mix(MixNodeId),
    Production(ProductionNodeId),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Mix(d) => d.fmt(f),
            NodeId::Production(t) => t.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[serde(alias = "Reactant", alias = "REACTANT")]
    Reactant,
    #[serde(alias = "Product", alias = "PRODUCT")]
    Product,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Reactant => "reactant",
            Role::Product => "product",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Mix → production, weight α (kg input per kg main output).
    Alpha,
    /// Production → mix, weight μ (consumption-mix share).
    Mu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
    pub material: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLine {
    pub role: Role,
    pub material: String,
    /// α for reactants; output ratio for products.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstanceLine {
    pub role: Role,
    pub material: String,
    pub smiles: String,
    pub ratio: f64,
    /// Mass fraction λ of this substance within its material.
    pub lambda: f64,
}

/// Bill of materials plus bill of substances for one production node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeBill {
    pub materials: Vec<MaterialLine>,
    pub substances: Vec<SubstanceLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRemoval {
    pub role: Role,
    pub material: String,
    pub smiles: String,
    pub lambda: f64,
}

impl NodeBill {
    pub fn materials_of(&self, role: Role) -> impl Iterator<Item = &MaterialLine> {
        self.materials.iter().filter(move |m| m.role == role)
    }

    pub fn substances_of<'a>(&'a self, role: Role, material: &'a str) -> impl Iterator<Item = &'a SubstanceLine> {
        self.substances.iter().filter(move |s| s.role == role && s.material == material)
    }

    pub fn ratio(&self, role: Role, material: &str) -> f64 {
        self.materials_of(role).find(|m| m.material == material).map_or(0.0, |m| m.ratio)
    }

    pub fn lambda(&self, role: Role, material: &str, smiles: &str) -> f64 {
        self.substances_of(role, material).filter(|s| s.smiles == smiles).map(|s| s.lambda).sum()
    }

    /// Distinct substance SMILES of one role, in first-seen order.
    pub fn substance_set(&self, role: Role) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.substances
            .iter()
            .filter(|s| s.role == role && seen.insert(s.smiles.as_str()))
            .map(|s| s.smiles.as_str())
            .collect()
    }

    pub fn recompute_lambda(&mut self) {
        let mut totals: HashMap<(Role, String), f64> = HashMap::new();
        for s in &self.substances {
            *totals.entry((s.role, s.material.clone())).or_default() += s.ratio;
        }
        for s in &mut self.substances {
            let total = totals[&(s.role, s.material.clone())];
            s.lambda = if total > 0.0 { s.ratio / total } else { 0.0 };
        }
    }

    /// Drop substance rows whose mass fraction is below `min_ratio` and
    /// renormalize. A material never loses its largest row.
    pub fn apply_threshold(&self, min_ratio: f64) -> (NodeBill, Vec<ThresholdRemoval>) {
        let mut keep = vec![true; self.substances.len()];
        let mut removed = Vec::new();
        for (i, s) in self.substances.iter().enumerate() {
            if s.lambda >= min_ratio {
                continue;
            }
            let largest = self
                .substances_of(s.role, &s.material)
                .map(|o| o.lambda)
                .fold(f64::NEG_INFINITY, f64::max);
            if largest < min_ratio && s.lambda == largest {
                continue;
            }
            keep[i] = false;
            removed.push(ThresholdRemoval {
                role: s.role,
                material: s.material.clone(),
                smiles: s.smiles.clone(),
                lambda: s.lambda,
            });
        }
        let mut out = NodeBill {
            materials: self.materials.clone(),
            substances: self
                .substances
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(s, _)| s.clone())
                .collect(),
        };
        out.recompute_lambda();
        (out, removed)
    }

    /// Per-SMILES Σ_p ratio_p·λ_ps across all materials of `role`.
    pub fn aggregate_substances(&self, role: Role) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for s in self.substances.iter().filter(|s| s.role == role) {
            *out.entry(s.smiles.clone()).or_insert(0.0) += self.ratio(role, &s.material) * s.lambda;
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Schema { file: String, message: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate definition: {0}")]
    DuplicateDefinition(String),
}

impl GraphError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        GraphError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub location: String,
    pub message: String,
    pub value: Option<f64>,
}

impl Diagnostic {
    pub fn error(code: &'static str, location: impl fmt::Display, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, location: location.to_string(), message: message.into(), value: None }
    }

    pub fn warning(code: &'static str, location: impl fmt::Display, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, location: location.to_string(), message: message.into(), value: None }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.location, self.message)?;
        if let Some(v) = self.value {
            write!(f, " (value {v})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Rescale μ columns whose raw sum is within [`MU_NORMALIZE_WINDOW`] of 1.
    pub normalize_mu: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { normalize_mu: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueChainGraph {
    mix_nodes: BTreeSet<MixNodeId>,
    production: BTreeMap<ProductionNodeId, NodeBill>,
    edges: Vec<Edge>,
    material_text: BTreeMap<String, String>,
}

/// Graph plus the warnings raised while building it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub graph: ValueChainGraph,
    pub warnings: Vec<Diagnostic>,
}

pub fn load_graph(
    bom: &[BomRecord],
    bos: &[BosRecord],
    mix: &[MixRecord],
    options: LoadOptions,
) -> Result<Loaded, GraphError> {
    let mut warnings = Vec::new();
    let mut graph = ValueChainGraph::default();

    for r in bom {
        let t = ProductionNodeId::new(&r.node_c, &r.node_b, &r.node_g);
        let bill = graph.production.entry(t.clone()).or_default();
        if bill.materials.iter().any(|m| m.role == r.role && m.material == r.material) {
            return Err(GraphError::DuplicateDefinition(format!(
                "{t} lists {} material {} twice",
                r.role, r.material
            )));
        }
        bill.materials.push(MaterialLine { role: r.role, material: r.material.clone(), ratio: r.ratio });
        if let Some(text) = r.material_text.as_deref().filter(|s| !s.is_empty()) {
            graph.material_text.entry(r.material.clone()).or_insert_with(|| text.to_string());
        }
    }

    for r in bos {
        let t = ProductionNodeId::new(&r.node_c, &r.node_b, &r.node_g);
        let Some(bill) = graph.production.get_mut(&t) else {
            return Err(GraphError::DanglingReference(format!("substance row names undefined node {t}")));
        };
        if !bill.materials.iter().any(|m| m.role == r.role && m.material == r.material) {
            return Err(GraphError::DanglingReference(format!(
                "{t} substance {} belongs to {} material {} missing from the bill of materials",
                r.smiles, r.role, r.material
            )));
        }
        if bill.substances.iter().any(|s| s.role == r.role && s.material == r.material && s.smiles == r.smiles) {
            return Err(GraphError::DuplicateDefinition(format!(
                "{t} lists substance {} in {} twice",
                r.smiles, r.material
            )));
        }
        bill.substances.push(SubstanceLine {
            role: r.role,
            material: r.material.clone(),
            smiles: r.smiles.clone(),
            ratio: r.ratio,
            lambda: 0.0,
        });
    }

    for (t, bill) in &mut graph.production {
        bill.recompute_lambda();
        for m in bill.materials_of(Role::Reactant) {
            let d = t.supply(&m.material);
            graph.mix_nodes.insert(d.clone());
            graph.edges.push(Edge {
                kind: EdgeKind::Alpha,
                from: NodeId::Mix(d),
                to: NodeId::Production(t.clone()),
                material: m.material.clone(),
                weight: m.ratio,
            });
        }
    }

    let mut seen = HashSet::new();
    let mut mu_edges = Vec::new();
    for r in mix {
        let d = MixNodeId::new(&r.mix_c, &r.mix_p);
        let t = ProductionNodeId::new(&r.src_c, &r.src_b, &r.src_g);
        let Some(bill) = graph.production.get(&t) else {
            return Err(GraphError::DanglingReference(format!("mix row for {d} names undefined node {t}")));
        };
        if !bill.materials_of(Role::Product).any(|m| m.material == r.mix_p) {
            return Err(GraphError::DanglingReference(format!("{t} does not produce {} (mix row for {d})", r.mix_p)));
        }
        if !seen.insert((d.clone(), t.clone())) {
            return Err(GraphError::DuplicateDefinition(format!("mix share {t} -> {d} given twice")));
        }
        graph.mix_nodes.insert(d.clone());
        mu_edges.push(Edge {
            kind: EdgeKind::Mu,
            from: NodeId::Production(t),
            to: NodeId::Mix(d),
            material: r.mix_p.clone(),
            weight: r.mu,
        });
    }

    if options.normalize_mu {
        let mut sums: BTreeMap<NodeId, f64> = BTreeMap::new();
        for e in &mu_edges {
            *sums.entry(e.to.clone()).or_default() += e.weight;
        }
        for (d, sum) in sums {
            let off = (sum - 1.0).abs();
            if off > MU_SUM_TOLERANCE && off <= MU_NORMALIZE_WINDOW && sum > 0.0 {
                warn!("{d}: consumption-mix shares sum to {sum}, rescaled to 1");
                warnings.push(
                    Diagnostic::warning("mu-normalized", &d, "consumption-mix shares rescaled to sum to 1")
                        .with_value(sum),
                );
                for e in mu_edges.iter_mut().filter(|e| e.to == d) {
                    e.weight /= sum;
                }
            }
        }
    }
    graph.edges.extend(mu_edges);

    let mut synthesized = Vec::new();
    for (t, bill) in &graph.production {
        for m in bill.materials_of(Role::Product) {
            let has_outlet = graph.edges.iter().any(|e| {
                e.kind == EdgeKind::Mu && e.material == m.material && e.from == NodeId::Production(t.clone())
            });
            if has_outlet {
                continue;
            }
            let d = t.supply(&m.material);
            if graph.mix_nodes.contains(&d) {
                warnings.push(Diagnostic::warning(
                    "product-unrouted",
                    t,
                    format!("product {} has no mix row and {d} already exists; left unconnected", m.material),
                ));
            } else {
                info!("{t}: synthesized terminal mix node {d}");
                synthesized.push((t.clone(), d, m.material.clone()));
            }
        }
    }
    for (t, d, material) in synthesized {
        graph.mix_nodes.insert(d.clone());
        graph.edges.push(Edge {
            kind: EdgeKind::Mu,
            from: NodeId::Production(t),
            to: NodeId::Mix(d),
            material,
            weight: 1.0,
        });
    }

    Ok(Loaded { graph, warnings })
}

impl ValueChainGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.mix_nodes.is_empty() && self.production.is_empty()
    }

    pub fn mix_nodes(&self) -> &BTreeSet<MixNodeId> {
        &self.mix_nodes
    }

    pub fn production_nodes(&self) -> impl Iterator<Item = &ProductionNodeId> {
        self.production.keys()
    }

    pub fn bills(&self) -> &BTreeMap<ProductionNodeId, NodeBill> {
        &self.production
    }

    pub fn bill(&self, t: &ProductionNodeId) -> Option<&NodeBill> {
        self.production.get(t)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.mix_nodes.len() + self.production.len()
    }

    /// Add an edge as-is. No bipartiteness check; [`ValueChainGraph::validate`] reports violations.
    pub fn insert_edge(&mut self, edge: Edge) {
        self.edges.push(edge);
    }

    pub fn add_mix_node(&mut self, d: MixNodeId) {
        self.mix_nodes.insert(d);
    }

    pub fn set_material_text(&mut self, material: impl Into<String>, text: impl Into<String>) {
        self.material_text.insert(material.into(), text.into());
    }

    /// Display name for a material code.
    pub fn label<'a>(&'a self, material: &'a str) -> &'a str {
        self.material_text.get(material).map_or(material, String::as_str)
    }

    pub fn in_edges<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| &e.to == node)
    }

    pub fn out_edges<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| &e.from == node)
    }

    /// Mix nodes with no incoming edge.
    pub fn inlet_nodes(&self) -> BTreeSet<MixNodeId> {
        let targets: HashSet<&NodeId> = self.edges.iter().map(|e| &e.to).collect();
        self.mix_nodes
            .iter()
            .filter(|d| !targets.contains(&NodeId::Mix((*d).clone())))
            .cloned()
            .collect()
    }

    /// Mix nodes with no outgoing edge and at least one incoming edge.
    pub fn terminal_nodes(&self) -> BTreeSet<MixNodeId> {
        let sources: HashSet<&NodeId> = self.edges.iter().map(|e| &e.from).collect();
        let targets: HashSet<&NodeId> = self.edges.iter().map(|e| &e.to).collect();
        self.mix_nodes
            .iter()
            .filter(|d| {
                let n = NodeId::Mix((*d).clone());
                !sources.contains(&n) && targets.contains(&n)
            })
            .cloned()
            .collect()
    }

    /// Production sources of a mix node with their μ.
    pub fn mu_sources(&self, d: &MixNodeId) -> Vec<(&ProductionNodeId, f64)> {
        self.edges
            .iter()
            .filter_map(|e| match (&e.kind, &e.from, &e.to) {
                (EdgeKind::Mu, NodeId::Production(t), NodeId::Mix(m)) if m == d => Some((t, e.weight)),
                _ => None,
            })
            .collect()
    }

    /// Substances carried by a mix node: products of its sources for that
    /// material, or for an inlet, the reactant rows of its consumers.
    pub fn mix_substances(&self, d: &MixNodeId) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (t, _) in self.mu_sources(d) {
            if let Some(bill) = self.production.get(t) {
                out.extend(bill.substances_of(Role::Product, &d.product).map(|s| s.smiles.clone()));
            }
        }
        for (t, bill) in &self.production {
            if t.company == d.company {
                out.extend(bill.substances_of(Role::Reactant, &d.product).map(|s| s.smiles.clone()));
            }
        }
        out
    }

    pub fn with_threshold(&self, min_ratio: f64) -> (ValueChainGraph, Vec<(ProductionNodeId, ThresholdRemoval)>) {
        let mut out = self.clone();
        let mut removed = Vec::new();
        for (t, bill) in out.production.iter_mut() {
            let (next, gone) = bill.apply_threshold(min_ratio);
            for r in &gone {
                info!("{t}: dropped trace substance {} from {} (λ = {:.4})", r.smiles, r.material, r.lambda);
            }
            *bill = next;
            removed.extend(gone.into_iter().map(|r| (t.clone(), r)));
        }
        (out, removed)
    }

    pub fn to_records(&self) -> (Vec<BomRecord>, Vec<BosRecord>, Vec<MixRecord>) {
        let mut bom = Vec::new();
        let mut bos = Vec::new();
        for (t, bill) in &self.production {
            for m in &bill.materials {
                bom.push(BomRecord {
                    node_c: t.company.clone(),
                    node_b: t.process.clone(),
                    node_g: t.main_product.clone(),
                    role: m.role,
                    material: m.material.clone(),
                    ratio: m.ratio,
                    material_text: self.material_text.get(&m.material).cloned(),
                });
            }
            for s in &bill.substances {
                bos.push(BosRecord {
                    node_c: t.company.clone(),
                    node_b: t.process.clone(),
                    node_g: t.main_product.clone(),
                    role: s.role,
                    material: s.material.clone(),
                    smiles: s.smiles.clone(),
                    ratio: s.ratio,
                });
            }
        }
        let mix = self
            .edges
            .iter()
            .filter_map(|e| match (&e.kind, &e.from, &e.to) {
                (EdgeKind::Mu, NodeId::Production(t), NodeId::Mix(d)) => Some(MixRecord {
                    mix_c: d.company.clone(),
                    mix_p: d.product.clone(),
                    src_c: t.company.clone(),
                    src_b: t.process.clone(),
                    src_g: t.main_product.clone(),
                    mu: e.weight,
                }),
                _ => None,
            })
            .collect();
        (bom, bos, mix)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let exists = |n: &NodeId| match n {
            NodeId::Mix(d) => self.mix_nodes.contains(d),
            NodeId::Production(t) => self.production.contains_key(t),
        };

        let mut mu_sums: BTreeMap<&NodeId, f64> = BTreeMap::new();
        for e in &self.edges {
            let loc = format!("{} -> {}", e.from, e.to);
            for end in [&e.from, &e.to] {
                if !exists(end) {
                    out.push(Diagnostic::error("dangling", &loc, format!("edge endpoint {end} is not defined")));
                }
            }
            let shape_ok = matches!(
                (&e.kind, &e.from, &e.to),
                (EdgeKind::Alpha, NodeId::Mix(_), NodeId::Production(_))
                    | (EdgeKind::Mu, NodeId::Production(_), NodeId::Mix(_))
            );
            if !shape_ok {
                out.push(Diagnostic::error(
                    "non-bipartite",
                    &loc,
                    "edges must connect a mix node and a production node",
                ));
            }
            match e.kind {
                EdgeKind::Alpha if !(e.weight > 0.0) => out.push(
                    Diagnostic::error("alpha", &loc, format!("input ratio for {} must be positive", e.material))
                        .with_value(e.weight),
                ),
                EdgeKind::Mu if !(0.0..=1.0).contains(&e.weight) => out.push(
                    Diagnostic::error("mu-range", &loc, "consumption-mix share outside [0, 1]").with_value(e.weight),
                ),
                _ => {}
            }
            if e.kind == EdgeKind::Mu {
                *mu_sums.entry(&e.to).or_default() += e.weight;
            }
        }
        for (d, sum) in mu_sums {
            if (sum - 1.0).abs() > MU_SUM_TOLERANCE {
                out.push(
                    Diagnostic::error("mu-sum", d, "consumption-mix shares do not sum to 1").with_value(sum),
                );
            }
        }

        for (t, bill) in &self.production {
            for m in &bill.materials {
                let total: f64 = bill.substances_of(m.role, &m.material).map(|s| s.ratio).sum();
                if !(total > 0.0) {
                    out.push(Diagnostic::error(
                        "lambda-zero",
                        t,
                        format!("{} material {} has no substance mass", m.role, m.material),
                    ));
                }
                if m.role == Role::Product && !(m.ratio > 0.0) {
                    out.push(
                        Diagnostic::error("ratio", t, format!("product ratio for {} must be positive", m.material))
                            .with_value(m.ratio),
                    );
                }
            }
            for s in &bill.substances {
                if s.ratio < 0.0 {
                    out.push(
                        Diagnostic::error("ratio", t, format!("negative substance ratio for {}", s.smiles))
                            .with_value(s.ratio),
                    );
                }
            }
            let mut carbon_product = false;
            for s in &bill.substances {
                match parse_molecule(&s.smiles) {
                    Ok(m) => carbon_product |= s.role == Role::Product && m.contains("C"),
                    Err(e) => out.push(Diagnostic::error("smiles", t, format!("{}: {e}", s.smiles))),
                }
            }
            if !carbon_product {
                out.push(Diagnostic::warning("no-carbon-product", t, "no product substance contains carbon"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bom(t: (&str, &str, &str), role: Role, material: &str, ratio: f64) -> BomRecord {
        BomRecord {
            node_c: t.0.into(),
            node_b: t.1.into(),
            node_g: t.2.into(),
            role,
            material: material.into(),
            ratio,
            material_text: None,
        }
    }

    fn bos(t: (&str, &str, &str), role: Role, material: &str, smiles: &str, ratio: f64) -> BosRecord {
        BosRecord {
            node_c: t.0.into(),
            node_b: t.1.into(),
            node_g: t.2.into(),
            role,
            material: material.into(),
            smiles: smiles.into(),
            ratio,
        }
    }

    const TDI: (&str, &str, &str) = ("COMP2", "PLNT11", "PROD29");

    fn tdi_records() -> (Vec<BomRecord>, Vec<BosRecord>) {
        use Role::*;
        let bom = vec![
            bom(TDI, Reactant, "PROD31", 0.53),
            bom(TDI, Reactant, "PROD19", 0.04),
            bom(TDI, Reactant, "PROD6", 0.46),
            bom(TDI, Reactant, "PROD10", 0.52),
            bom(TDI, Product, "PROD36", 0.63),
            bom(TDI, Product, "PROD29", 1.16),
        ];
        let bos = vec![
            bos(TDI, Product, "PROD29", "Cc1ccc(N=C=O)cc1N=C=O", 1.16),
            bos(TDI, Product, "PROD36", "Cl", 0.56),
            bos(TDI, Product, "PROD36", "O=C=O", 0.02),
            bos(TDI, Product, "PROD36", "[C-]#[O+]", 0.02),
            bos(TDI, Product, "PROD36", "N#N", 0.03),
            bos(TDI, Reactant, "PROD10", "[C-]#[O+]", 0.52),
            bos(TDI, Reactant, "PROD6", "ClCl", 0.46),
            bos(TDI, Reactant, "PROD19", "[Na+].[OH-]", 0.02),
            bos(TDI, Reactant, "PROD19", "O", 0.02),
            bos(TDI, Reactant, "PROD31", "Cc1ccc(N)cc1N", 0.53),
        ];
        (bom, bos)
    }

    #[test]
    fn tdi_node_alpha_edges() {
        let (b, s) = tdi_records();
        let loaded = load_graph(&b, &s, &[], LoadOptions::default()).unwrap();
        let g = loaded.graph;
        assert_eq!(g.production_nodes().count(), 1);
        let alpha = |m: &str| {
            g.edges().iter().find(|e| e.kind == EdgeKind::Alpha && e.material == m).unwrap().weight
        };
        assert_eq!(alpha("PROD31"), 0.53);
        assert_eq!(alpha("PROD10"), 0.52);
        // both products get synthesized terminal mix nodes
        assert_eq!(g.terminal_nodes().len(), 2);
        assert_eq!(g.inlet_nodes().len(), 4);
        let bill = g.bill(&ProductionNodeId::new("COMP2", "PLNT11", "PROD29")).unwrap();
        assert!((bill.lambda(Role::Product, "PROD36", "Cl") - 0.56 / 0.63).abs() < 1e-12);
        assert!(g.validate().iter().all(|d| !d.is_error()));
    }

    #[test]
    fn empty_records_give_empty_valid_graph() {
        let g = load_graph(&[], &[], &[], LoadOptions::default()).unwrap().graph;
        assert!(g.is_empty());
        assert!(g.validate().is_empty());
        assert!(g.inlet_nodes().is_empty());
    }

    #[test]
    fn dangling_mix_source() {
        let (b, s) = tdi_records();
        let mix = vec![MixRecord {
            mix_c: "COMP2".into(),
            mix_p: "PROD29".into(),
            src_c: "COMP9".into(),
            src_b: "PLNT1".into(),
            src_g: "PROD29".into(),
            mu: 1.0,
        }];
        let err = load_graph(&b, &s, &mix, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, GraphError::DanglingReference(_)));
    }

    #[test]
    fn duplicate_bom_row() {
        let (mut b, s) = tdi_records();
        b.push(b[0].clone());
        assert!(matches!(
            load_graph(&b, &s, &[], LoadOptions::default()).unwrap_err(),
            GraphError::DuplicateDefinition(_)
        ));
    }

    fn two_source_records(mu_a: f64, mu_b: f64) -> (Vec<BomRecord>, Vec<BosRecord>, Vec<MixRecord>) {
        use Role::*;
        let a = ("C1", "B1", "P1");
        let b2 = ("C1", "B2", "P1");
        let bom_rows = vec![
            bom(a, Reactant, "P0", 1.0),
            bom(a, Product, "P1", 1.0),
            bom(b2, Reactant, "P0", 1.0),
            bom(b2, Product, "P1", 1.0),
        ];
        let bos_rows = vec![
            bos(a, Reactant, "P0", "C", 1.0),
            bos(a, Product, "P1", "C", 1.0),
            bos(b2, Reactant, "P0", "C", 1.0),
            bos(b2, Product, "P1", "C", 1.0),
        ];
        let mix = |g: &(&str, &str, &str), mu| MixRecord {
            mix_c: "C2".into(),
            mix_p: "P1".into(),
            src_c: g.0.into(),
            src_b: g.1.into(),
            src_g: g.2.into(),
            mu,
        };
        (bom_rows, bos_rows, vec![mix(&a, mu_a), mix(&b2, mu_b)])
    }

    #[test]
    fn mu_sum_diagnostic() {
        let (b, s, m) = two_source_records(0.6, 0.5);
        let g = load_graph(&b, &s, &m, LoadOptions::default()).unwrap().graph;
        let diags = g.validate();
        let d = diags.iter().find(|d| d.code == "mu-sum").unwrap();
        assert!((d.value.unwrap() - 1.1).abs() < 1e-12);
        assert!(d.is_error());
    }

    #[test]
    fn mu_near_one_is_normalized() {
        let (b, s, m) = two_source_records(0.6, 0.4005);
        let loaded = load_graph(&b, &s, &m, LoadOptions::default()).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.graph.validate().iter().all(|d| d.code != "mu-sum"));
        let raw = load_graph(&b, &s, &m, LoadOptions { normalize_mu: false }).unwrap();
        assert!(raw.graph.validate().iter().any(|d| d.code == "mu-sum"));
    }

    #[test]
    fn mix_to_mix_edge_is_not_bipartite() {
        let (b, s) = tdi_records();
        let mut g = load_graph(&b, &s, &[], LoadOptions::default()).unwrap().graph;
        g.insert_edge(Edge {
            kind: EdgeKind::Mu,
            from: NodeId::Mix(MixNodeId::new("COMP2", "PROD31")),
            to: NodeId::Mix(MixNodeId::new("COMP2", "PROD10")),
            material: "PROD10".into(),
            weight: 1.0,
        });
        assert!(g.validate().iter().any(|d| d.code == "non-bipartite" && d.is_error()));
    }

    #[test]
    fn single_mix_node_is_inlet() {
        let mut g = ValueChainGraph::new();
        g.add_mix_node(MixNodeId::new("C", "P"));
        assert_eq!(g.inlet_nodes().len(), 1);
    }

    #[test]
    fn threshold_drops_trace_rows() {
        let (b, mut s) = tdi_records();
        s.push(bos(TDI, Role::Reactant, "PROD31", "Cc1ccccc1", 0.002));
        let g = load_graph(&b, &s, &[], LoadOptions::default()).unwrap().graph;
        let (g2, removed) = g.with_threshold(DEFAULT_THRESHOLD);
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].1.smiles, "Cc1ccccc1");
        let t = ProductionNodeId::new("COMP2", "PLNT11", "PROD29");
        assert_eq!(g2.bill(&t).unwrap().lambda(Role::Reactant, "PROD31", "Cc1ccc(N)cc1N"), 1.0);
        let (same, none) = g.with_threshold(0.0);
        assert!(none.is_empty());
        assert_eq!(same, g);
    }

    #[test]
    fn threshold_keeps_a_single_survivor() {
        let bill = NodeBill {
            materials: vec![MaterialLine { role: Role::Reactant, material: "M".into(), ratio: 1.0 }],
            substances: vec![
                SubstanceLine { role: Role::Reactant, material: "M".into(), smiles: "C".into(), ratio: 0.3, lambda: 0.3 },
                SubstanceLine { role: Role::Reactant, material: "M".into(), smiles: "O".into(), ratio: 0.7, lambda: 0.7 },
            ],
        };
        let (out, removed) = bill.apply_threshold(0.5);
        assert_eq!(removed.len(), 1);
        assert_eq!(out.substances.len(), 1);
        assert_eq!(out.substances[0].lambda, 1.0);
    }

    #[test]
    fn aggregate_worked_example() {
        let m = |name: &str, ratio| MaterialLine { role: Role::Reactant, material: name.into(), ratio };
        let s = |mat: &str, smi: &str, ratio| SubstanceLine {
            role: Role::Reactant,
            material: mat.into(),
            smiles: smi.into(),
            ratio,
            lambda: 0.0,
        };
        let mut bill = NodeBill {
            materials: vec![m("M1", 20.0 / 60.0), m("M2", 40.0 / 60.0)],
            substances: vec![s("M1", "Cc1ccc(N)cc1N", 0.8), s("M1", "[C-]#[O+]", 0.2), s("M2", "[C-]#[O+]", 1.0)],
        };
        bill.recompute_lambda();
        let agg = bill.aggregate_substances(Role::Reactant);
        assert!((agg["[C-]#[O+]"] - (20.0 / 60.0 * 0.2 + 40.0 / 60.0)).abs() < 1e-12);
        assert!((agg["Cc1ccc(N)cc1N"] - 20.0 / 60.0 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn records_round_trip() {
        let (b, s) = tdi_records();
        let g = load_graph(&b, &s, &[], LoadOptions::default()).unwrap().graph;
        let (b2, s2, m2) = g.to_records();
        let g2 = load_graph(&b2, &s2, &m2, LoadOptions::default()).unwrap().graph;
        assert_eq!(g, g2);
    }
}
