//! Bills of atoms: reaction strings built from a node's bill of substances,
//! substance-level shares φ read off atom-mapped reactions, and material-level
//! shares ψ apportioned by mass contribution.

mod provider;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::smiles::{
    atom_correspondence, molar_mass, parse_molecule, token_count, MassError, Molecule, Reaction,
    ReactionError, SmilesError,
};
use crate::valuechain::{write_csv, GraphError, NodeBill, ProductionNodeId, Role};

pub use provider::{
    FileProvider, HealthStatus, HttpProvider, MappedReaction, MappingCache, MappingError,
    MappingProvider, MAX_BATCH,
};

pub const DEFAULT_MULTIPLICITY_CAP: u32 = 6;
pub const DEFAULT_TOKEN_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum AtomBillError {
    #[error("{node}: cannot parse {smiles}: {source}")]
    Smiles {
        node: String,
        smiles: String,
        #[source]
        source: SmilesError,
    },
    #[error("{node}: {smiles}: {source}")]
    Mass {
        node: String,
        smiles: String,
        #[source]
        source: MassError,
    },
    #[error("{node}: bill has no {role} substances")]
    EmptySide { node: String, role: Role },
    #[error("{node}: reaction for {product} has {tokens} tokens, above the limit of {limit}")]
    TokenBudget { node: String, product: String, tokens: usize, limit: usize },
    #[error("cannot parse mapped reaction {text}: {source}")]
    Reaction {
        text: String,
        #[source]
        source: ReactionError,
    },
    #[error("reaction {0} carries no atom maps")]
    Unmapped(String),
    #[error("reaction {0} has more than one product substance")]
    ProductMultiplicity(String),
    #[error("product {0} appears in more than one mapped reaction")]
    DuplicateProduct(String),
    #[error(transparent)]
    Output(#[from] GraphError),
}

/// Moles per kg of main output for every substance of a node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoleTable {
    pub reactants: Vec<(String, f64)>,
    pub products: Vec<(String, f64)>,
}

impl MoleTable {
    pub fn get(&self, role: Role, smiles: &str) -> Option<f64> {
        let side = match role {
            Role::Reactant => &self.reactants,
            Role::Product => &self.products,
        };
        side.iter().find(|(s, _)| s == smiles).map(|(_, n)| *n)
    }
}

fn parse_in(node: &ProductionNodeId, smiles: &str) -> Result<Molecule, AtomBillError> {
    parse_molecule(smiles).map_err(|source| AtomBillError::Smiles {
        node: node.to_string(),
        smiles: smiles.to_string(),
        source,
    })
}

/// n_s = (1/M_s)·Σ_p α_p·λ_ps for each substance, per role, in bill order.
pub fn compute_moles(node: &ProductionNodeId, bill: &NodeBill) -> Result<MoleTable, AtomBillError> {
    let side = |role: Role| -> Result<Vec<(String, f64)>, AtomBillError> {
        let masses = bill.aggregate_substances(role);
        bill.substance_set(role)
            .into_iter()
            .map(|s| {
                let m = parse_in(node, s)?;
                let mw = molar_mass(&m).map_err(|source| AtomBillError::Mass {
                    node: node.to_string(),
                    smiles: s.to_string(),
                    source,
                })?;
                Ok((s.to_string(), masses[s] / mw))
            })
            .collect()
    };
    Ok(MoleTable { reactants: side(Role::Reactant)?, products: side(Role::Product)? })
}

#[derive(Debug, Clone, Copy)]
pub struct ReactionOptions {
    pub multiplicity_cap: u32,
    pub token_limit: usize,
}

impl Default for ReactionOptions {
    fn default() -> Self {
        Self { multiplicity_cap: DEFAULT_MULTIPLICITY_CAP, token_limit: DEFAULT_TOKEN_LIMIT }
    }
}

/// One unmapped reaction string: every reactant substance, one product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionRequest {
    pub node: ProductionNodeId,
    pub product: String,
    pub reactants: Vec<(String, u32)>,
    pub text: String,
}

/// Build one reaction string per product substance that contains a tracked element.
pub fn build_reaction_smiles(
    node: &ProductionNodeId,
    moles: &MoleTable,
    elements: &[String],
    options: ReactionOptions,
) -> Result<Vec<ReactionRequest>, AtomBillError> {
    if moles.reactants.is_empty() {
        return Err(AtomBillError::EmptySide { node: node.to_string(), role: Role::Reactant });
    }
    if moles.products.is_empty() {
        return Err(AtomBillError::EmptySide { node: node.to_string(), role: Role::Product });
    }
    let mut out = Vec::new();
    for (product, n_p) in &moles.products {
        let molecule = parse_in(node, product)?;
        if !elements.iter().any(|e| molecule.contains(e)) {
            continue;
        }
        let reactants: Vec<(String, u32)> = moles
            .reactants
            .iter()
            .map(|(s, n_j)| (s.clone(), multiplicity(*n_j, *n_p, options.multiplicity_cap)))
            .collect();
        let left: Vec<&str> = reactants
            .iter()
            .flat_map(|(s, k)| std::iter::repeat(s.as_str()).take(*k as usize))
            .collect();
        let text = format!("{}>>{}", left.join("."), product);
        let tokens = token_count(&text);
        if tokens > options.token_limit {
            return Err(AtomBillError::TokenBudget {
                node: node.to_string(),
                product: product.clone(),
                tokens,
                limit: options.token_limit,
            });
        }
        out.push(ReactionRequest { node: node.clone(), product: product.clone(), reactants, text });
    }
    Ok(out)
}

fn multiplicity(n_j: f64, n_p: f64, cap: u32) -> u32 {
    let ratio = if n_p > 0.0 { (n_j / n_p).round() } else { f64::from(cap) };
    (ratio.max(1.0).min(f64::from(cap.max(1)))) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiRow {
    pub reactant: String,
    pub product: String,
    pub element: String,
    pub atom_count: u32,
    /// Atoms of `element` in one product molecule.
    pub total_atoms: u32,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unattributed {
    pub product: String,
    pub element: String,
    pub count: u32,
    pub total: u32,
}

impl fmt::Display for Unattributed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} {} atoms in {} have no mapped origin", self.count, self.total, self.element, self.product)
    }
}

/// Substance-level bill of atoms φ_{s'se}.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubstanceAtomBill {
    pub rows: Vec<PhiRow>,
    pub unattributed: Vec<Unattributed>,
    /// Reaction-level notes (duplicate maps and similar).
    pub notes: Vec<String>,
}

impl SubstanceAtomBill {
    pub fn share(&self, reactant: &str, product: &str, element: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.reactant == reactant && r.product == product && r.element == element)
            .map(|r| r.share)
            .sum()
    }

    pub fn row_sum(&self, product: &str, element: &str) -> f64 {
        self.rows.iter().filter(|r| r.product == product && r.element == element).map(|r| r.share).sum()
    }
}

fn side_text(molecules: &[Molecule]) -> String {
    molecules.iter().map(Molecule::to_unmapped_smiles).collect::<Vec<_>>().join(".")
}

/// Read φ off mapped reactions. Reactant copies with the same SMILES pool
/// into one row; product atoms without a mapped origin are reported and
/// left out, so Σφ may fall below 1.
pub fn derive_phi(reactions: &[Reaction], elements: &[String]) -> Result<SubstanceAtomBill, AtomBillError> {
    let mut bill = SubstanceAtomBill::default();
    let mut seen_products = Vec::new();
    for reaction in reactions {
        let text = reaction.to_smiles();
        if !reaction.mapped {
            return Err(AtomBillError::Unmapped(text));
        }
        if reaction.products.len() > 1 {
            let first = reaction.products[0].to_unmapped_smiles();
            if reaction.products.iter().all(|p| p.to_unmapped_smiles() == first) {
                return Err(AtomBillError::ProductMultiplicity(text));
            }
        }
        let product = side_text(&reaction.products);
        if seen_products.contains(&product) {
            return Err(AtomBillError::DuplicateProduct(product));
        }
        seen_products.push(product.clone());
        for d in &reaction.diagnostics {
            bill.notes.push(format!("{product}: {d}"));
        }
        let reactant_names: Vec<String> = reaction.reactants.iter().map(Molecule::to_unmapped_smiles).collect();

        for element in elements {
            let total: u32 = reaction.products.iter().map(|p| p.count(element)).sum();
            if total == 0 {
                continue;
            }
            let corr = atom_correspondence(reaction, element);
            let mut counts: Vec<(String, u32)> = Vec::new();
            for link in &corr.links {
                let name = &reactant_names[link.reactant];
                match counts.iter_mut().find(|(n, _)| n == name) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((name.clone(), 1)),
                }
            }
            counts.sort();
            for (reactant, atom_count) in counts {
                bill.rows.push(PhiRow {
                    reactant,
                    product: product.clone(),
                    element: element.clone(),
                    atom_count,
                    total_atoms: total,
                    share: f64::from(atom_count) / f64::from(total),
                });
            }
            if !corr.unattributed.is_empty() {
                bill.unattributed.push(Unattributed {
                    product: product.clone(),
                    element: element.clone(),
                    count: corr.unattributed.len() as u32,
                    total,
                });
            }
        }
    }
    Ok(bill)
}

/// Flag reactants that would have to supply more atoms of an element than
/// they hold, given the node's mole balance.
pub fn conservation_check(moles: &MoleTable, phi: &SubstanceAtomBill) -> Vec<String> {
    let mut demand: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for row in &phi.rows {
        let Some(n_p) = moles.products.iter().find(|(s, _)| *s == row.product).map(|(_, n)| *n) else {
            continue;
        };
        *demand.entry((row.reactant.as_str(), row.element.as_str())).or_default() += n_p * f64::from(row.atom_count);
    }
    let mut out = Vec::new();
    for ((reactant, element), need) in demand {
        let Some((smiles, n)) = moles.reactants.iter().find(|(s, _)| s == reactant || component_of(reactant, s))
        else {
            continue;
        };
        let Ok(m) = parse_molecule(smiles) else { continue };
        let have = n * f64::from(m.count(element));
        if need > have * (1.0 + 1e-6) {
            out.push(format!(
                "{reactant} supplies {need:.4e} mol {element} to products but only {have:.4e} mol enter"
            ));
        }
    }
    out
}

fn component_of(component: &str, substance: &str) -> bool {
    substance.split('.').any(|c| c == component)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiRow {
    pub reactant_material: String,
    pub reactant_smiles: String,
    pub product_material: String,
    pub product_smiles: String,
    pub element: String,
    pub share: f64,
    /// φ row(s) this entry was apportioned from.
    pub atom_count: u32,
    pub substance_share: f64,
}

/// Material-level bill of atoms ψ_{p's'pse}.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialAtomBill {
    pub rows: Vec<PsiRow>,
    pub notes: Vec<String>,
}

impl MaterialAtomBill {
    pub fn share(&self, reactant_material: &str, reactant: &str, product_material: &str, product: &str, element: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| {
                r.reactant_material == reactant_material
                    && r.reactant_smiles == reactant
                    && r.product_material == product_material
                    && r.product_smiles == product
                    && r.element == element
            })
            .map(|r| r.share)
            .sum()
    }

    pub fn row_sum(&self, product_material: &str, product: &str, element: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.product_material == product_material && r.product_smiles == product && r.element == element)
            .map(|r| r.share)
            .sum()
    }
}

/// Resolve a substance name from a mapped reaction to the bill's SMILES.
/// Exact text first, then membership as a dot-component, then equal
/// element counts.
fn resolve<'a>(name: &str, candidates: &[&'a str]) -> Option<&'a str> {
    if let Some(c) = candidates.iter().find(|c| **c == name) {
        return Some(c);
    }
    if let Some(c) = candidates.iter().find(|c| component_of(name, c)) {
        return Some(c);
    }
    let target = parse_molecule(name).ok()?.element_counts;
    candidates
        .iter()
        .find(|c| parse_molecule(c).map(|m| m.element_counts == target).unwrap_or(false))
        .copied()
}

/// ψ = (α_p'·λ_p's' / Σ_p' α_p'·λ_p's')·φ_s'se, replicated over every
/// product material that carries s.
pub fn derive_psi(phi: &SubstanceAtomBill, bill: &NodeBill) -> MaterialAtomBill {
    let reactants = bill.substance_set(Role::Reactant);
    let products = bill.substance_set(Role::Product);
    let mut out = MaterialAtomBill::default();
    let mut index: HashMap<(String, String, String, String, String), usize> = HashMap::new();

    for row in &phi.rows {
        let Some(source) = resolve(&row.reactant, &reactants) else {
            out.notes.push(format!("reactant {} in atom map is not in the bill of substances", row.reactant));
            continue;
        };
        let Some(target) = resolve(&row.product, &products) else {
            out.notes.push(format!("product {} in atom map is not in the bill of substances", row.product));
            continue;
        };
        let weights: Vec<(&str, f64)> = bill
            .materials_of(Role::Reactant)
            .map(|m| (m.material.as_str(), m.ratio * bill.lambda(Role::Reactant, &m.material, source)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            out.notes.push(format!("reactant {source} has no mass in any input material"));
            continue;
        }
        let product_materials: Vec<&str> = bill
            .materials_of(Role::Product)
            .filter(|m| bill.lambda(Role::Product, &m.material, target) > 0.0)
            .map(|m| m.material.as_str())
            .collect();
        for (p_src, w) in &weights {
            for p in &product_materials {
                let key = (
                    p_src.to_string(),
                    source.to_string(),
                    p.to_string(),
                    target.to_string(),
                    row.element.clone(),
                );
                let share = w / total * row.share;
                match index.get(&key) {
                    Some(&i) => {
                        out.rows[i].share += share;
                        out.rows[i].atom_count += row.atom_count;
                        out.rows[i].substance_share += row.share;
                    }
                    None => {
                        index.insert(key, out.rows.len());
                        out.rows.push(PsiRow {
                            reactant_material: p_src.to_string(),
                            reactant_smiles: source.to_string(),
                            product_material: p.to_string(),
                            product_smiles: target.to_string(),
                            element: row.element.clone(),
                            share,
                            atom_count: row.atom_count,
                            substance_share: row.share,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct BoaRecord<'a> {
    node_c: &'a str,
    node_b: &'a str,
    node_g: &'a str,
    reactant_material: &'a str,
    reactant_smiles: &'a str,
    product_material: &'a str,
    product_smiles: &'a str,
    element: &'a str,
    atom_count: u32,
    atom_share: f64,
}

#[derive(Debug, Serialize)]
struct PsiRecord<'a> {
    node_c: &'a str,
    node_b: &'a str,
    node_g: &'a str,
    reactant_material: &'a str,
    reactant_smiles: &'a str,
    product_material: &'a str,
    product_smiles: &'a str,
    element: &'a str,
    share: f64,
}

/// Write `boa.csv` (substance shares with their materials) and `psi.csv`.
pub fn write_atom_bills(dir: &Path, bills: &BTreeMap<ProductionNodeId, MaterialAtomBill>) -> Result<(), AtomBillError> {
    let mut boa = Vec::new();
    let mut psi = Vec::new();
    for (t, bill) in bills {
        for r in &bill.rows {
            boa.push(BoaRecord {
                node_c: &t.company,
                node_b: &t.process,
                node_g: &t.main_product,
                reactant_material: &r.reactant_material,
                reactant_smiles: &r.reactant_smiles,
                product_material: &r.product_material,
                product_smiles: &r.product_smiles,
                element: &r.element,
                atom_count: r.atom_count,
                atom_share: r.substance_share,
            });
            psi.push(PsiRecord {
                node_c: &t.company,
                node_b: &t.process,
                node_g: &t.main_product,
                reactant_material: &r.reactant_material,
                reactant_smiles: &r.reactant_smiles,
                product_material: &r.product_material,
                product_smiles: &r.product_smiles,
                element: &r.element,
                share: r.share,
            });
        }
    }
    write_csv(&dir.join("boa.csv"), &boa)?;
    write_csv(&dir.join("psi.csv"), &psi)?;
    Ok(())
}
