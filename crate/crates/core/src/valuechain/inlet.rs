use std::collections::BTreeMap;

use thiserror::Error;

use super::{InletRecord, MixNodeId};

const SHARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InletError {
    #[error("{mix} {smiles} {element}: attribute {attribute} given twice")]
    Duplicate { mix: MixNodeId, smiles: String, element: String, attribute: String },
    #[error("{mix} {smiles} {element}: share {share} for {attribute} outside [0, 1]")]
    ShareRange { mix: MixNodeId, smiles: String, element: String, attribute: String, share: f64 },
    #[error("{mix} {smiles} {element}: attribute shares sum to {sum}")]
    ShareSum { mix: MixNodeId, smiles: String, element: String, sum: f64 },
}

pub type InletKey = (MixNodeId, String, String);

/// Fixed attribute shares h at inlet mix nodes, keyed by (node, smiles, element).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InletAttributeTable {
    rows: BTreeMap<InletKey, BTreeMap<String, f64>>,
}

impl InletAttributeTable {
    pub fn from_records(records: &[InletRecord]) -> Result<Self, InletError> {
        let mut rows: BTreeMap<InletKey, BTreeMap<String, f64>> = BTreeMap::new();
        for r in records {
            let mix = MixNodeId::new(&r.mix_c, &r.mix_p);
            if !(0.0..=1.0).contains(&r.share) {
                return Err(InletError::ShareRange {
                    mix,
                    smiles: r.smiles.clone(),
                    element: r.element.clone(),
                    attribute: r.attribute.clone(),
                    share: r.share,
                });
            }
            let entry = rows.entry((mix.clone(), r.smiles.clone(), r.element.clone())).or_default();
            if entry.insert(r.attribute.clone(), r.share).is_some() {
                return Err(InletError::Duplicate {
                    mix,
                    smiles: r.smiles.clone(),
                    element: r.element.clone(),
                    attribute: r.attribute.clone(),
                });
            }
        }
        let table = Self { rows };
        table.check_sums()?;
        Ok(table)
    }

    pub(crate) fn from_map(rows: BTreeMap<InletKey, BTreeMap<String, f64>>) -> Result<Self, InletError> {
        let table = Self { rows };
        table.check_sums()?;
        Ok(table)
    }

    fn check_sums(&self) -> Result<(), InletError> {
        for ((mix, smiles, element), shares) in &self.rows {
            let sum: f64 = shares.values().sum();
            if (sum - 1.0).abs() > SHARE_TOLERANCE {
                return Err(InletError::ShareSum {
                    mix: mix.clone(),
                    smiles: smiles.clone(),
                    element: element.clone(),
                    sum,
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn entries(&self) -> &BTreeMap<InletKey, BTreeMap<String, f64>> {
        &self.rows
    }

    pub fn get(&self, mix: &MixNodeId, smiles: &str, element: &str) -> Option<&BTreeMap<String, f64>> {
        self.rows.get(&(mix.clone(), smiles.to_string(), element.to_string()))
    }

    /// Share h for one attribute; attributes not listed count as 0.
    pub fn share(&self, mix: &MixNodeId, smiles: &str, element: &str, attribute: &str) -> Option<f64> {
        self.get(mix, smiles, element).map(|m| m.get(attribute).copied().unwrap_or(0.0))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &MixNodeId> {
        let mut last: Option<&MixNodeId> = None;
        self.rows.keys().filter_map(move |(m, _, _)| {
            if last == Some(m) {
                None
            } else {
                last = Some(m);
                Some(m)
            }
        })
    }

    pub fn records(&self) -> Vec<InletRecord> {
        self.rows
            .iter()
            .flat_map(|((mix, smiles, element), shares)| {
                shares.iter().map(move |(attribute, share)| InletRecord {
                    mix_c: mix.company.clone(),
                    mix_p: mix.product.clone(),
                    smiles: smiles.clone(),
                    element: element.clone(),
                    attribute: attribute.clone(),
                    share: *share,
                })
            })
            .collect()
    }
}
