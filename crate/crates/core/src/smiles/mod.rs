//! SMILES and reaction-SMILES parsing.
//!
//! Molecules keep the input atom order; nothing is canonicalized. Substance
//! identity elsewhere in the crate is the verbatim SMILES text.

pub mod elements;
mod molecule;
mod reaction;
mod tokens;

pub use molecule::{
    molar_mass, parse_molecule, Atom, Bond, BondOrder, MassError, Molecule, SmilesError,
    SmilesErrorKind,
};
pub use reaction::{
    atom_correspondence, parse_reaction, AtomLink, Correspondence, Reaction, ReactionDiagnostic,
    ReactionError, Side,
};
pub use tokens::token_count;
