use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::molecule::{parse_molecule, Molecule, SmilesError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Reactants,
    Reagents,
    Products,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Reactants => "reactants",
            Side::Reagents => "reagents",
            Side::Products => "products",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReactionError {
    #[error("expected exactly two '>' separators, found {0}")]
    SeparatorCount(usize),
    #[error("reaction has an empty {0} side")]
    EmptySide(Side),
    #[error("{side} component {index}: {source}")]
    Component {
        side: Side,
        index: usize,
        #[source]
        source: SmilesError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReactionDiagnostic {
    /// The same map number appears on more than one atom of one side.
    DuplicateMap { side: Side, map: u32 },
    /// A product atom carries a map number absent from the reactant side.
    UnmatchedProductMap { map: u32 },
}

impl fmt::Display for ReactionDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionDiagnostic::DuplicateMap { side, map } => {
                write!(f, "map number {map} occurs more than once among {side}")
            }
            ReactionDiagnostic::UnmatchedProductMap { map } => {
                write!(f, "product map number {map} has no reactant counterpart")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<Molecule>,
    pub reagents: Vec<Molecule>,
    pub products: Vec<Molecule>,
    pub mapped: bool,
    pub diagnostics: Vec<ReactionDiagnostic>,
}

impl Reaction {
    /// Reaction text with atom maps removed from every component.
    pub fn to_unmapped_smiles(&self) -> String {
        let side = |ms: &[Molecule]| {
            ms.iter().map(Molecule::to_unmapped_smiles).collect::<Vec<_>>().join(".")
        };
        format!("{}>{}>{}", side(&self.reactants), side(&self.reagents), side(&self.products))
    }

    pub fn to_smiles(&self) -> String {
        let side = |ms: &[Molecule]| ms.iter().map(Molecule::to_smiles).collect::<Vec<_>>().join(".");
        format!("{}>{}>{}", side(&self.reactants), side(&self.reagents), side(&self.products))
    }
}

/// Split on `.` outside bracket atoms.
fn components(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            '.' if depth == 0 => {
                out.push((start, &text[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((start, &text[start..]));
    out
}

fn parse_side(text: &str, side: Side) -> Result<Vec<Molecule>, ReactionError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    components(text)
        .into_iter()
        .enumerate()
        .map(|(index, (_, part))| {
            parse_molecule(part).map_err(|source| ReactionError::Component { side, index, source })
        })
        .collect()
}

pub fn parse_reaction(text: &str) -> Result<Reaction, ReactionError> {
    let text = text.trim();
    let parts: Vec<&str> = text.split('>').collect();
    if parts.len() != 3 {
        return Err(ReactionError::SeparatorCount(parts.len().saturating_sub(1)));
    }
    let reactants = parse_side(parts[0], Side::Reactants)?;
    let reagents = parse_side(parts[1], Side::Reagents)?;
    let products = parse_side(parts[2], Side::Products)?;
    if reactants.is_empty() {
        return Err(ReactionError::EmptySide(Side::Reactants));
    }
    if products.is_empty() {
        return Err(ReactionError::EmptySide(Side::Products));
    }
    let mapped = reactants
        .iter()
        .chain(&reagents)
        .chain(&products)
        .any(Molecule::has_map_numbers);

    let mut diagnostics = Vec::new();
    let reactant_maps = map_table(&reactants);
    let product_maps = map_table(&products);
    for (side, table) in [(Side::Reactants, &reactant_maps), (Side::Products, &product_maps)] {
        let mut dups: Vec<u32> = table.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| *k).collect();
        dups.sort_unstable();
        diagnostics.extend(dups.into_iter().map(|map| ReactionDiagnostic::DuplicateMap { side, map }));
    }
    let mut unmatched: Vec<u32> =
        product_maps.keys().filter(|k| !reactant_maps.contains_key(k)).copied().collect();
    unmatched.sort_unstable();
    diagnostics.extend(unmatched.into_iter().map(|map| ReactionDiagnostic::UnmatchedProductMap { map }));

    Ok(Reaction { reactants, reagents, products, mapped, diagnostics })
}

fn map_table(molecules: &[Molecule]) -> HashMap<u32, Vec<(usize, usize)>> {
    let mut table: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
    for (mi, m) in molecules.iter().enumerate() {
        for (ai, atom) in m.atoms.iter().enumerate() {
            if let Some(map) = atom.map_number {
                table.entry(map).or_default().push((mi, ai));
            }
        }
    }
    table
}

/// One product atom (or, for hydrogen, one hydrogen carried by a product
/// atom) traced to a reactant atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AtomLink {
    pub product: usize,
    pub product_atom: usize,
    pub reactant: usize,
    pub reactant_atom: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Correspondence {
    pub links: Vec<AtomLink>,
    /// (product index, product atom index) with no unique same-element partner.
    pub unattributed: Vec<(usize, usize)>,
}

/// Trace every product atom of `element` to its reactant origin via map
/// numbers. Hydrogens attached to a heavy atom follow that atom's mapping.
pub fn atom_correspondence(reaction: &Reaction, element: &str) -> Correspondence {
    let reactant_maps = map_table(&reaction.reactants);
    let product_maps = map_table(&reaction.products);
    let partner = |pi: usize, ai: usize| -> Option<(usize, usize)> {
        let atom = &reaction.products[pi].atoms[ai];
        let map = atom.map_number?;
        if product_maps.get(&map).map_or(0, Vec::len) > 1 {
            return None;
        }
        match reactant_maps.get(&map).map(Vec::as_slice) {
            Some(&[(ri, rai)]) if reaction.reactants[ri].atoms[rai].element == atom.element => {
                Some((ri, rai))
            }
            _ => None,
        }
    };

    let mut out = Correspondence::default();
    for (pi, molecule) in reaction.products.iter().enumerate() {
        for (ai, atom) in molecule.atoms.iter().enumerate() {
            let copies = if element == "H" {
                atom.total_h() as usize + usize::from(atom.element == "H")
            } else {
                usize::from(atom.element == element)
            };
            if copies == 0 {
                continue;
            }
            match partner(pi, ai) {
                Some((ri, rai)) => out.links.extend(std::iter::repeat(AtomLink {
                    product: pi,
                    product_atom: ai,
                    reactant: ri,
                    reactant_atom: rai,
                }).take(copies)),
                None => out.unattributed.extend(std::iter::repeat((pi, ai)).take(copies)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TDI_MAPPED: &str = "[CH3:1][c:2]1[cH:3][cH:4][c:5]([NH2:6])[cH:7][c:8]1[NH2:9].[C-:10]#[O+:11].[C-:12]#[O+:13]>>[CH3:1][c:2]1[cH:3][cH:4][c:5]([N:6]=[C:10]=[O:11])[cH:7][c:8]1[N:9]=[C:12]=[O:13]";

    #[test]
    fn unmapped_tdi_reaction() {
        let r = parse_reaction("Cc1ccc(N)cc1N.[C-]#[O+].[C-]#[O+]>>Cc1ccc(N=C=O)cc1N=C=O").unwrap();
        assert_eq!(r.reactants.len(), 3);
        assert_eq!(r.products.len(), 1);
        assert!(r.reagents.is_empty());
        assert!(!r.mapped);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn identity_relabeling() {
        let r = parse_reaction("[CH3:1][OH:2]>>[CH3:1][OH:2]").unwrap();
        assert!(r.mapped);
        let c = atom_correspondence(&r, "C");
        assert_eq!(c.links.len(), 1);
        assert!(c.unattributed.is_empty());
        assert_eq!(r.to_unmapped_smiles(), "CO>>CO");
    }

    #[test]
    fn separator_and_empty_errors() {
        assert_eq!(parse_reaction(">>").unwrap_err(), ReactionError::EmptySide(Side::Reactants));
        assert_eq!(parse_reaction("C>>").unwrap_err(), ReactionError::EmptySide(Side::Products));
        assert_eq!(parse_reaction("C>C").unwrap_err(), ReactionError::SeparatorCount(1));
        assert!(matches!(
            parse_reaction("C.C(>>C").unwrap_err(),
            ReactionError::Component { side: Side::Reactants, index: 1, .. }
        ));
    }

    #[test]
    fn tdi_carbon_correspondence() {
        let r = parse_reaction(TDI_MAPPED).unwrap();
        assert!(r.diagnostics.is_empty());
        let c = atom_correspondence(&r, "C");
        assert_eq!(c.links.len(), 9);
        assert_eq!(c.links.iter().filter(|l| l.reactant == 0).count(), 7);
        assert_eq!(c.links.iter().filter(|l| l.reactant > 0).count(), 2);
        let h = atom_correspondence(&r, "H");
        assert_eq!(h.links.len(), 6);
        assert!(h.links.iter().all(|l| l.reactant == 0));
    }

    #[test]
    fn unmapped_product_atom_is_unattributed() {
        let r = parse_reaction("[CH3:1][OH:2]>>[CH3:1]C[OH:2]").unwrap();
        let c = atom_correspondence(&r, "C");
        assert_eq!(c.links.len(), 1);
        assert_eq!(c.unattributed, vec![(0, 1)]);
    }

    #[test]
    fn duplicate_maps_are_reported_and_unattributed() {
        let r = parse_reaction("[CH4:1].[CH4:1]>>[CH4:1]").unwrap();
        assert_eq!(r.diagnostics, vec![ReactionDiagnostic::DuplicateMap { side: Side::Reactants, map: 1 }]);
        let c = atom_correspondence(&r, "C");
        assert!(c.links.is_empty());
        assert_eq!(c.unattributed.len(), 1);
    }

    #[test]
    fn element_mismatch_is_unattributed() {
        let r = parse_reaction("[CH4:1].[OH2:2]>>[CH3:2][OH:1]").unwrap();
        let c = atom_correspondence(&r, "C");
        assert_eq!(c.unattributed.len(), 1);
    }

    #[test]
    fn unmatched_product_map_diagnostic() {
        let r = parse_reaction("[CH4:1]>>[CH3:1][CH3:5]").unwrap();
        assert_eq!(r.diagnostics, vec![ReactionDiagnostic::UnmatchedProductMap { map: 5 }]);
    }

    #[test]
    fn dotted_bracket_components() {
        let r = parse_reaction("[Na+].[OH-].Cl>>O").unwrap();
        assert_eq!(r.reactants.len(), 3);
    }
}
