//! End-to-end trace: reaction strings, mapping, atom bills, LP, outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::{info, warn};
use thiserror::Error;

use crate::atombill::{
    build_reaction_smiles, compute_moles, conservation_check, derive_phi, derive_psi, write_atom_bills, AtomBillError,
    MappingCache, MappingError, MappingProvider, MaterialAtomBill, ReactionOptions, ReactionRequest, SubstanceAtomBill,
};
use crate::lp::{build_lp, AttributeLP, AttributeSolution, BuildError, SimplexError};
use crate::report::{emit_sankey, SankeyDocument};
use crate::smiles::{elements::atomic_weight, molar_mass, parse_molecule, parse_reaction, Reaction};
use crate::valuechain::{Diagnostic, GraphError, InletAttributeTable, MixNodeId, ProductionNodeId, Role, ValueChainGraph};

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub elements: Vec<String>,
    pub attributes: Vec<String>,
    pub threshold: f64,
    pub reaction: ReactionOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            elements: vec!["C".into()],
            attributes: vec!["fossil".into(), "biogenic".into()],
            threshold: crate::valuechain::DEFAULT_THRESHOLD,
            reaction: ReactionOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has {} error diagnostic(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    AtomBill(#[from] AtomBillError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("mapped reaction does not match its request after removing maps: {unmapped} vs {mapped}")]
    Contract { unmapped: String, mapped: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Thresholded graph plus the removals as warnings.
pub fn prepare_graph(graph: &ValueChainGraph, threshold: f64) -> Result<(ValueChainGraph, Vec<Diagnostic>), PipelineError> {
    let errors: Vec<Diagnostic> = graph.validate().into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(PipelineError::Invalid(errors));
    }
    let (g, removed) = graph.with_threshold(threshold);
    let notes = removed
        .into_iter()
        .map(|(t, r)| {
            Diagnostic::warning("threshold", &t, format!("dropped {} {} below threshold", r.material, r.smiles))
                .with_value(r.lambda)
        })
        .collect();
    Ok((g, notes))
}

/// Unmapped reaction strings for every production node, in node order.
pub fn reaction_requests(graph: &ValueChainGraph, opts: &TraceOptions) -> Result<Vec<ReactionRequest>, PipelineError> {
    let mut out = Vec::new();
    for (t, bill) in graph.bills() {
        let has_tracked = bill.substances.iter().filter(|s| s.role == Role::Product).any(|s| {
            parse_molecule(&s.smiles).map(|m| opts.elements.iter().any(|e| m.contains(e))).unwrap_or(false)
        });
        if !has_tracked {
            continue;
        }
        let moles = compute_moles(t, bill)?;
        out.extend(build_reaction_smiles(t, &moles, &opts.elements, opts.reaction)?);
    }
    Ok(out)
}

/// Components of one side as sorted element-count multisets.
fn side_signature(molecules: &[crate::smiles::Molecule]) -> Vec<BTreeMap<String, u32>> {
    let mut v: Vec<_> = molecules.iter().map(|m| m.element_counts.clone()).collect();
    v.sort();
    v
}

/// Map-stripped text must reproduce the request, up to explicit hydrogens.
pub fn check_contract(unmapped: &str, mapped: &Reaction) -> bool {
    if mapped.to_unmapped_smiles() == unmapped {
        return true;
    }
    match parse_reaction(unmapped) {
        Ok(request) => {
            side_signature(&request.reactants) == side_signature(&mapped.reactants)
                && side_signature(&request.products) == side_signature(&mapped.products)
        }
        Err(_) => false,
    }
}

/// Mapped text for each request: cache first, then the provider.
pub fn resolve_mappings(
    requests: &[ReactionRequest],
    cache: &MappingCache,
    provider: Option<&dyn MappingProvider>,
) -> Result<Vec<Reaction>, PipelineError> {
    let texts: Vec<String> = requests.iter().map(|r| r.text.clone()).collect();
    let mapped = match provider {
        Some(p) => cache.resolve(p, &texts)?,
        None => {
            let missing: BTreeSet<String> = texts.iter().filter(|t| cache.get(t).is_none()).cloned().collect();
            if !missing.is_empty() {
                return Err(MappingError::Missing(missing.into_iter().collect()).into());
            }
            texts.iter().map(|t| cache.get(t).expect("checked above")).collect()
        }
    };
    texts
        .iter()
        .zip(mapped)
        .map(|(unmapped, m)| {
            let reaction =
                parse_reaction(&m).map_err(|source| AtomBillError::Reaction { text: m.clone(), source })?;
            if !check_contract(unmapped, &reaction) {
                return Err(PipelineError::Contract { unmapped: unmapped.clone(), mapped: m });
            }
            Ok(reaction)
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct AtomBills {
    pub phi: BTreeMap<ProductionNodeId, SubstanceAtomBill>,
    pub psi: BTreeMap<ProductionNodeId, MaterialAtomBill>,
    pub notes: Vec<Diagnostic>,
}

/// φ and ψ per node from the mapped reactions, which align with `requests`.
pub fn atom_bills(
    graph: &ValueChainGraph,
    requests: &[ReactionRequest],
    reactions: &[Reaction],
    elements: &[String],
) -> Result<AtomBills, PipelineError> {
    let mut grouped: BTreeMap<&ProductionNodeId, Vec<Reaction>> = BTreeMap::new();
    for (req, r) in requests.iter().zip(reactions) {
        grouped.entry(&req.node).or_default().push(r.clone());
    }
    let mut out = AtomBills::default();
    for (t, rs) in grouped {
        let bill = graph.bill(t).expect("requests come from graph nodes");
        let phi = derive_phi(&rs, elements)?;
        for u in &phi.unattributed {
            out.notes.push(Diagnostic::warning("unattributed", t, u.to_string()));
        }
        for n in &phi.notes {
            out.notes.push(Diagnostic::warning("atom-bill", t, n.clone()));
        }
        let moles = compute_moles(t, bill)?;
        for n in conservation_check(&moles, &phi) {
            out.notes.push(Diagnostic::warning("conservation", t, n));
        }
        let psi = derive_psi(&phi, bill);
        for n in &psi.notes {
            out.notes.push(Diagnostic::warning("atom-bill", t, n.clone()));
        }
        out.phi.insert(t.clone(), phi);
        out.psi.insert(t.clone(), psi);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub graph: ValueChainGraph,
    pub requests: Vec<ReactionRequest>,
    pub bills: AtomBills,
    pub lp: AttributeLP,
    pub solution: AttributeSolution,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Headline {
    pub node: MixNodeId,
    pub label: String,
    /// Element-mass-weighted attribute share; `None` without tracked atoms.
    pub share: Option<f64>,
}

impl Headline {
    pub fn line(&self, prefix: &str) -> String {
        match self.share {
            Some(v) => {
                let pct = v * 100.0;
                format!("{prefix}({}) = {:.1}%", self.label, if pct <= 0.0 { 0.0 } else { pct })
            }
            None => format!("{prefix}({}) = n/a", self.label),
        }
    }
}

/// Full run from a loaded graph.
pub fn trace(
    graph: &ValueChainGraph,
    inlets: &InletAttributeTable,
    cache: &MappingCache,
    provider: Option<&dyn MappingProvider>,
    opts: &TraceOptions,
) -> Result<Trace, PipelineError> {
    let (g, mut diagnostics) = prepare_graph(graph, opts.threshold)?;
    let requests = reaction_requests(&g, opts)?;
    info!("{} reaction string(s) across {} production node(s)", requests.len(), g.bills().len());
    let reactions = resolve_mappings(&requests, cache, provider)?;
    let bills = atom_bills(&g, &requests, &reactions, &opts.elements)?;
    diagnostics.extend(bills.notes.iter().cloned());
    let lp = build_lp(&g, &bills.psi, inlets, &opts.attributes, &opts.elements)?;
    diagnostics.extend(lp.diagnostics.iter().cloned());
    let solution = lp.solve()?;
    for d in &diagnostics {
        warn!("{d}");
    }
    Ok(Trace { graph: g, requests, bills, lp, solution, diagnostics })
}

fn element_mass_fraction(smiles: &str, element: &str) -> f64 {
    let Ok(m) = parse_molecule(smiles) else { return 0.0 };
    let (Ok(total), Some(w)) = (molar_mass(&m), atomic_weight(element)) else { return 0.0 };
    if total > 0.0 {
        f64::from(m.count(element)) * w / total
    } else {
        0.0
    }
}

/// Attribute share of each terminal mix node, weighted by element mass.
pub fn headlines(graph: &ValueChainGraph, sol: &AttributeSolution, attribute: &str, element: &str) -> Vec<Headline> {
    graph
        .terminal_nodes()
        .into_iter()
        .map(|d| {
            let mut weight = 0.0;
            let mut weighted = 0.0;
            for (t, mu) in graph.mu_sources(&d) {
                let Some(bill) = graph.bill(t) else { continue };
                for s in bill.substances_of(Role::Product, &d.product) {
                    let w = mu * s.lambda * element_mass_fraction(&s.smiles, element);
                    if w <= 0.0 {
                        continue;
                    }
                    let key = crate::lp::AttributeKey::mix(d.clone(), &s.smiles, element);
                    if let Some(v) = sol.share(&key, attribute) {
                        weight += w;
                        weighted += w * v;
                    }
                }
            }
            Headline {
                label: graph.label(&d.product).to_string(),
                share: (weight > 0.0).then(|| weighted / weight),
                node: d,
            }
        })
        .collect()
}

impl Trace {
    pub fn headlines(&self, attribute: &str, element: &str) -> Vec<Headline> {
        headlines(&self.graph, &self.solution, attribute, element)
    }

    pub fn sankey(&self, attribute: &str, element: &str) -> (SankeyDocument, Vec<Diagnostic>) {
        emit_sankey(&self.graph, &self.solution, attribute, element)
    }

    /// beta.csv, slack.csv, sankey.json, sankey.html, solution.json, lp.txt,
    /// boa.csv and psi.csv under `dir`.
    pub fn write_outputs(&self, dir: &Path, attribute: &str, element: &str) -> Result<Vec<Diagnostic>, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| GraphError::io(dir, e))?;
        let write = |name: &str, text: &str| -> Result<(), PipelineError> {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| GraphError::io(&path, e).into())
        };
        self.solution.write_beta_csv(&dir.join("beta.csv"))?;
        self.solution.write_slack_csv(&dir.join("slack.csv"))?;
        let (doc, warnings) = self.sankey(attribute, element);
        write("sankey.json", &doc.to_json())?;
        let title = format!("{attribute} {element} attribute flows");
        write("sankey.html", &doc.to_html(&title))?;
        let mut json = serde_json::to_string_pretty(&self.solution.to_json()).expect("solution serializes");
        json.push('\n');
        write("solution.json", &json)?;
        write("lp.txt", &self.lp.dump())?;
        write_atom_bills(dir, &self.bills.psi)?;
        Ok(warnings)
    }
}
