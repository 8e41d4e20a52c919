//! Fixed-point propagation of inlet shares, used to cross-check the LP.
//!
//! Keys are found by a worklist over the edge list rather than by the LP's
//! reachability pass, and the update is plain Jacobi.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::model::{AttributeKey, BuildError, ElementCache};
use crate::atombill::MaterialAtomBill;
use crate::valuechain::{EdgeKind, InletAttributeTable, NodeId, ProductionNodeId, Role, ValueChainGraph};

pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const ORACLE_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub attributes: Vec<String>,
    pub beta: BTreeMap<AttributeKey, Vec<f64>>,
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
}

impl OracleResult {
    pub fn share(&self, key: &AttributeKey, attribute: &str) -> Option<f64> {
        let i = self.attributes.iter().position(|a| a == attribute)?;
        self.beta.get(key).map(|v| v[i])
    }
}

enum Update {
    Fixed,
    Sum(Vec<(usize, f64)>),
}

pub fn fixed_point_oracle(
    graph: &ValueChainGraph,
    psi: &BTreeMap<ProductionNodeId, MaterialAtomBill>,
    inlets: &InletAttributeTable,
    attributes: &[String],
    elements: &[String],
) -> Result<OracleResult, BuildError> {
    let mut cache = ElementCache::new();
    let mut seen: BTreeSet<AttributeKey> = BTreeSet::new();
    let mut fixed: BTreeMap<AttributeKey, Vec<f64>> = BTreeMap::new();
    let mut queue: VecDeque<AttributeKey> = VecDeque::new();

    let sources = graph.inlet_nodes();
    for ((d, s, e), shares) in inlets.entries() {
        if !elements.contains(e) || !sources.contains(d) {
            continue;
        }
        let key = AttributeKey::mix(d.clone(), s.clone(), e.clone());
        fixed.insert(key.clone(), attributes.iter().map(|a| shares.get(a).copied().unwrap_or(0.0)).collect());
        if seen.insert(key.clone()) {
            queue.push_back(key);
        }
    }

    while let Some(key) = queue.pop_front() {
        match &key {
            AttributeKey::Mix { node, smiles, element } => {
                let from = NodeId::Mix(node.clone());
                for edge in graph.out_edges(&from).filter(|e| e.kind == EdgeKind::Alpha) {
                    let NodeId::Production(t) = &edge.to else { continue };
                    let Some(bill) = graph.bill(t) else { continue };
                    if !bill.substances_of(Role::Reactant, &node.product).any(|s| s.smiles == *smiles) {
                        continue;
                    }
                    for s in bill.substances.iter().filter(|s| s.role == Role::Product) {
                        if !cache.contains(&s.smiles, element)? {
                            continue;
                        }
                        let next = AttributeKey::production(t.clone(), &s.material, &s.smiles, element);
                        if seen.insert(next.clone()) {
                            queue.push_back(next);
                        }
                    }
                }
            }
            AttributeKey::Production { node, material, smiles, element } => {
                let from = NodeId::Production(node.clone());
                for edge in graph.out_edges(&from).filter(|e| e.kind == EdgeKind::Mu && e.material == *material) {
                    let NodeId::Mix(d) = &edge.to else { continue };
                    let next = AttributeKey::mix(d.clone(), smiles, element);
                    if fixed.contains_key(&next) {
                        continue;
                    }
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }

    let keys: Vec<AttributeKey> = seen.into_iter().collect();
    let index: BTreeMap<&AttributeKey, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let empty = MaterialAtomBill::default();
    let updates: Vec<Update> = keys
        .iter()
        .map(|key| {
            if fixed.contains_key(key) {
                return Update::Fixed;
            }
            let mut terms = Vec::new();
            match key {
                AttributeKey::Production { node, material, smiles, element } => {
                    for r in psi.get(node).unwrap_or(&empty).rows.iter() {
                        if r.product_material != *material || r.product_smiles != *smiles || r.element != *element {
                            continue;
                        }
                        let src = AttributeKey::mix(node.supply(&r.reactant_material), &r.reactant_smiles, element);
                        if let Some(&i) = index.get(&src) {
                            terms.push((i, r.share));
                        }
                    }
                }
                AttributeKey::Mix { node, smiles, element } => {
                    for (t, mu) in graph.mu_sources(node) {
                        let src = AttributeKey::production(t.clone(), &node.product, smiles, element);
                        if let Some(&i) = index.get(&src) {
                            terms.push((i, mu));
                        }
                    }
                }
            }
            Update::Sum(terms)
        })
        .collect();

    let width = attributes.len();
    let mut current: Vec<Vec<f64>> =
        keys.iter().map(|k| fixed.get(k).cloned().unwrap_or_else(|| vec![0.0; width])).collect();
    let mut sweeps = 0;
    let mut residual = 0.0;
    let mut converged = keys.is_empty();
    while !converged && sweeps < ORACLE_MAX_SWEEPS {
        let mut next = current.clone();
        residual = 0.0f64;
        for (k, update) in updates.iter().enumerate() {
            if let Update::Sum(terms) = update {
                for a in 0..width {
                    let v: f64 = terms.iter().map(|&(i, w)| w * current[i][a]).sum();
                    residual = residual.max((v - current[k][a]).abs());
                    next[k][a] = v;
                }
            }
        }
        current = next;
        sweeps += 1;
        converged = residual < ORACLE_TOLERANCE;
    }

    Ok(OracleResult {
        attributes: attributes.to_vec(),
        beta: keys.into_iter().zip(current).collect(),
        sweeps,
        residual,
        converged,
    })
}
