use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use super::elements;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES string")]
    EmptyInput,
    #[error("unexpected character {0:?}")]
    UnexpectedCharacter(char),
    #[error("{0} is not a recognized element")]
    UnknownElement(String),
    #[error("bracket atom is not closed")]
    UnclosedBracket,
    #[error("malformed bracket atom")]
    InvalidBracketAtom,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("branch or ring bond without a preceding atom")]
    MissingAtom,
    #[error("ring bond {0} is never closed")]
    DanglingRingBond(u32),
    #[error("ring bond {0} closes with a conflicting bond symbol")]
    RingBondConflict(u32),
    #[error("ring bond {0} closes on its own atom")]
    RingSelfLoop(u32),
    #[error("bond symbol is not followed by an atom")]
    DanglingBond,
    #[error("wildcard atoms are not supported")]
    UnsupportedWildcard,
}

/// Parse failure with the byte offset into the (trimmed) input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES error at byte {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: &'static str,
    pub charge: i32,
    pub isotope: Option<u32>,
    pub aromatic: bool,
    pub explicit_h: u32,
    pub implicit_h: u32,
    pub map_number: Option<u32>,
    /// Written in brackets in the source text.
    pub bracket: bool,
    /// Stereo tag as written (`@`, `@@`, `@TH1`, ...). Ignored for counting.
    pub chirality: Option<String>,
}

impl Atom {
    pub fn total_h(&self) -> u32 {
        self.explicit_h + self.implicit_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Quadruple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the bond-order sum used for implicit hydrogens.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 4,
        }
    }

    fn from_symbol(c: u8) -> Option<Self> {
        Some(match c {
            b'-' | b'/' | b'\\' => BondOrder::Single,
            b'=' => BondOrder::Double,
            b'#' => BondOrder::Triple,
            b'$' => BondOrder::Quadruple,
            b':' => BondOrder::Aromatic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Atom(usize),
    Bond(u8),
    Open,
    Close,
    Ring { number: u32, percent: bool },
    Dot,
}

/// A parsed SMILES string. Atom order follows the input text.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub smiles_text: String,
    pub element_counts: BTreeMap<String, u32>,
    tokens: Vec<Token>,
}

impl Molecule {
    pub fn count(&self, element: &str) -> u32 {
        self.element_counts.get(element).copied().unwrap_or(0)
    }

    pub fn contains(&self, element: &str) -> bool {
        self.count(element) > 0
    }

    pub fn has_map_numbers(&self) -> bool {
        self.atoms.iter().any(|a| a.map_number.is_some())
    }

    pub fn net_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.charge).sum()
    }

    /// Element counts recomputed from the atom list.
    pub fn recount(&self) -> BTreeMap<String, u32> {
        count_elements(&self.atoms)
    }

    /// Serialize in input order, keeping map numbers.
    pub fn to_smiles(&self) -> String {
        self.write(false)
    }

    /// Serialize in input order with map numbers removed. Bracket atoms that
    /// only existed to carry a map number are written back in organic-subset
    /// form when that reproduces the same hydrogen count.
    pub fn to_unmapped_smiles(&self) -> String {
        self.write(true)
    }

    fn bond_sums(&self) -> Vec<u32> {
        let mut sums = vec![0; self.atoms.len()];
        for bond in &self.bonds {
            sums[bond.a] += bond.order.valence();
            sums[bond.b] += bond.order.valence();
        }
        sums
    }

    fn write(&self, strip_maps: bool) -> String {
        let sums = if strip_maps { self.bond_sums() } else { Vec::new() };
        let mut out = String::with_capacity(self.smiles_text.len());
        for token in &self.tokens {
            match *token {
                Token::Atom(i) => {
                    let atom = &self.atoms[i];
                    let bare = !atom.bracket
                        || (strip_maps && can_write_bare(atom, sums[i]));
                    write_atom(&mut out, atom, bare, strip_maps);
                }
                Token::Bond(c) => out.push(c as char),
                Token::Open => out.push('('),
                Token::Close => out.push(')'),
                Token::Ring { number, percent } => {
                    if percent || number > 9 {
                        out.push_str(&format!("%{number:02}"));
                    } else {
                        out.push(char::from(b'0' + number as u8));
                    }
                }
                Token::Dot => out.push('.'),
            }
        }
        out
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smiles())
    }
}

fn symbol_text(atom: &Atom) -> String {
    if atom.aromatic {
        atom.element.to_ascii_lowercase()
    } else {
        atom.element.to_string()
    }
}

fn write_atom(out: &mut String, atom: &Atom, bare: bool, strip_maps: bool) {
    if bare {
        out.push_str(&symbol_text(atom));
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(&symbol_text(atom));
    if let Some(ch) = &atom.chirality {
        out.push_str(ch);
    }
    match atom.explicit_h {
        0 => {}
        1 => out.push('H'),
        n => out.push_str(&format!("H{n}")),
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    if !strip_maps {
        if let Some(map) = atom.map_number {
            out.push_str(&format!(":{map}"));
        }
    }
    out.push(']');
}

fn can_write_bare(atom: &Atom, bond_sum: u32) -> bool {
    if atom.isotope.is_some() || atom.charge != 0 || atom.chirality.is_some() {
        return false;
    }
    if atom.aromatic && !matches!(atom.element, "B" | "C" | "N" | "O" | "P" | "S") {
        return false;
    }
    match elements::organic_valences(atom.element) {
        Some(valences) => implicit_hydrogens(valences, atom.aromatic, bond_sum) == atom.explicit_h,
        None => false,
    }
}

/// Implicit hydrogen count for an organic-subset atom.
///
/// Aliphatic atoms take the smallest standard valence that accommodates the
/// bond-order sum. Aromatic atoms reserve one valence unit for the ring and
/// use the lowest standard valence.
fn implicit_hydrogens(valences: &[u32], aromatic: bool, bond_sum: u32) -> u32 {
    if aromatic {
        valences[0].saturating_sub(bond_sum + 1)
    } else {
        valences
            .iter()
            .find(|&&v| v >= bond_sum)
            .map(|v| v - bond_sum)
            .unwrap_or(0)
    }
}

fn count_elements(atoms: &[Atom]) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    let mut hydrogens = 0;
    for atom in atoms {
        *counts.entry(atom.element.to_string()).or_insert(0) += 1;
        hydrogens += atom.total_h();
    }
    if hydrogens > 0 {
        *counts.entry("H".to_string()).or_insert(0) += hydrogens;
    }
    counts
}

/// Parse a single SMILES string (which may contain `.`-separated fragments).
pub fn parse_molecule(text: &str) -> Result<Molecule, SmilesError> {
    Parser::new(text).parse()
}

struct Parser<'a> {
    input: &'a [u8],
    source: &'a str,
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    tokens: Vec<Token>,
    /// ring number -> (atom, bond symbol at opening, offset)
    rings: HashMap<u32, (usize, Option<u8>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(source: &'a str) -> Self {
        let trimmed = source.trim();
        Self {
            input: trimmed.as_bytes(),
            source,
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            tokens: Vec::new(),
            rings: HashMap::new(),
        }
    }

    fn err(&self, kind: SmilesErrorKind) -> SmilesError {
        SmilesError::new(self.pos, kind)
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Molecule, SmilesError> {
        if self.input.is_empty() {
            return Err(self.err(SmilesErrorKind::EmptyInput));
        }
        let mut prev: Option<usize> = None;
        let mut pending: Option<(u8, usize)> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    if pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    branches.push((prev, self.pos));
                    self.tokens.push(Token::Open);
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    let Some((anchor, _)) = branches.pop() else {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis));
                    };
                    prev = anchor;
                    self.tokens.push(Token::Close);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    prev = None;
                    self.tokens.push(Token::Dot);
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    };
                    let start = self.pos;
                    let (number, percent) = self.ring_number()?;
                    let bond = pending.take().map(|(b, _)| b);
                    self.ring(atom, number, bond, start)?;
                    self.tokens.push(Token::Ring { number, percent });
                }
                b'*' => return Err(self.err(SmilesErrorKind::UnsupportedWildcard)),
                _ if BondOrder::from_symbol(c).is_some() => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.err(SmilesErrorKind::DanglingBond));
                    }
                    pending = Some((c, self.pos));
                    self.tokens.push(Token::Bond(c));
                    self.pos += 1;
                }
                _ => {
                    let atom = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.organic_atom()?
                    };
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    self.tokens.push(Token::Atom(idx));
                    if let Some(p) = prev {
                        let symbol = pending.take().map(|(b, _)| b);
                        let order = self.bond_order(p, idx, symbol);
                        self.bonds.push(Bond { a: p, b: idx, order });
                    }
                    pending = None;
                    prev = Some(idx);
                }
            }
        }

        if let Some((_, offset)) = pending {
            return Err(SmilesError::new(offset, SmilesErrorKind::DanglingBond));
        }
        if let Some(&(_, offset)) = branches.last() {
            return Err(SmilesError::new(offset, SmilesErrorKind::UnbalancedParenthesis));
        }
        if let Some((&number, &(_, _, offset))) = self.rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(SmilesError::new(offset, SmilesErrorKind::DanglingRingBond(number)));
        }

        self.assign_implicit_hydrogens();
        let element_counts = count_elements(&self.atoms);
        Ok(Molecule {
            atoms: self.atoms,
            bonds: self.bonds,
            smiles_text: self.source.to_string(),
            element_counts,
            tokens: self.tokens,
        })
    }

    fn bond_order(&self, a: usize, b: usize, symbol: Option<u8>) -> BondOrder {
        match symbol.and_then(BondOrder::from_symbol) {
            Some(order) => order,
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        }
    }

    fn ring_number(&mut self) -> Result<(u32, bool), SmilesError> {
        if self.peek() == Some(b'%') {
            let digits = self.input.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    let n = u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0');
                    self.pos += 3;
                    Ok((n, true))
                }
                _ => Err(self.err(SmilesErrorKind::UnexpectedCharacter('%'))),
            }
        } else {
            let n = u32::from(self.input[self.pos] - b'0');
            self.pos += 1;
            Ok((n, false))
        }
    }

    fn ring(&mut self, atom: usize, number: u32, bond: Option<u8>, offset: usize) -> Result<(), SmilesError> {
        match self.rings.remove(&number) {
            None => {
                self.rings.insert(number, (atom, bond, offset));
                Ok(())
            }
            Some((other, open_bond, _)) => {
                if other == atom {
                    return Err(SmilesError::new(offset, SmilesErrorKind::RingSelfLoop(number)));
                }
                let symbol = match (open_bond, bond) {
                    (Some(x), Some(y)) if BondOrder::from_symbol(x) != BondOrder::from_symbol(y) => {
                        return Err(SmilesError::new(offset, SmilesErrorKind::RingBondConflict(number)));
                    }
                    (x, y) => x.or(y),
                };
                let order = self.bond_order(other, atom, symbol);
                self.bonds.push(Bond { a: other, b: atom, order });
                Ok(())
            }
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let rest = &self.input[self.pos..];
        let (element, aromatic, len) = match rest {
            [b'C', b'l', ..] => ("Cl", false, 2),
            [b'B', b'r', ..] => ("Br", false, 2),
            [b'B', ..] => ("B", false, 1),
            [b'C', ..] => ("C", false, 1),
            [b'N', ..] => ("N", false, 1),
            [b'O', ..] => ("O", false, 1),
            [b'P', ..] => ("P", false, 1),
            [b'S', ..] => ("S", false, 1),
            [b'F', ..] => ("F", false, 1),
            [b'I', ..] => ("I", false, 1),
            [b'b', ..] => ("B", true, 1),
            [b'c', ..] => ("C", true, 1),
            [b'n', ..] => ("N", true, 1),
            [b'o', ..] => ("O", true, 1),
            [b'p', ..] => ("P", true, 1),
            [b's', ..] => ("S", true, 1),
            [c, ..] if c.is_ascii_alphabetic() => {
                let end = rest
                    .iter()
                    .skip(1)
                    .position(|b| !b.is_ascii_lowercase())
                    .map_or(rest.len(), |p| p + 1)
                    .min(2);
                let name = String::from_utf8_lossy(&rest[..end]).into_owned();
                return Err(self.err(SmilesErrorKind::UnknownElement(name)));
            }
            [c, ..] => return Err(self.err(SmilesErrorKind::UnexpectedCharacter(*c as char))),
            [] => return Err(self.err(SmilesErrorKind::EmptyInput)),
        };
        self.pos += len;
        Ok(Atom {
            element,
            charge: 0,
            isotope: None,
            aromatic,
            explicit_h: 0,
            implicit_h: 0,
            map_number: None,
            bracket: false,
            chirality: None,
        })
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.input[start..self.pos]).ok()?.parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let close = match self.input[open..].iter().position(|&c| c == b']') {
            Some(p) => open + p,
            None => return Err(SmilesError::new(open, SmilesErrorKind::UnclosedBracket)),
        };
        if self.input[open + 1..close].contains(&b'[') {
            return Err(SmilesError::new(open, SmilesErrorKind::UnclosedBracket));
        }
        self.pos = open + 1;

        let isotope = self.digits();

        let (element, aromatic) = self.bracket_symbol(close)?;

        let chirality = if self.peek() == Some(b'@') {
            let start = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                while self.peek().is_some_and(|c| c.is_ascii_uppercase()) {
                    self.pos += 1;
                }
                self.digits();
            }
            Some(String::from_utf8_lossy(&self.input[start..self.pos]).into_owned())
        } else {
            None
        };

        let explicit_h = if self.peek() == Some(b'H') {
            self.pos += 1;
            self.digits().unwrap_or(1)
        } else {
            0
        };

        let mut charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }

        let map_number = if self.peek() == Some(b':') {
            self.pos += 1;
            match self.digits() {
                Some(0) => None,
                Some(n) => Some(n),
                None => return Err(self.err(SmilesErrorKind::InvalidBracketAtom)),
            }
        } else {
            None
        };

        if self.pos != close {
            return Err(self.err(SmilesErrorKind::InvalidBracketAtom));
        }
        self.pos = close + 1;
        Ok(Atom {
            element,
            charge,
            isotope,
            aromatic,
            explicit_h,
            implicit_h: 0,
            map_number,
            bracket: true,
            chirality,
        })
    }

    fn bracket_symbol(&mut self, close: usize) -> Result<(&'static str, bool), SmilesError> {
        let rest = &self.input[self.pos..close];
        let Some(&first) = rest.first() else {
            return Err(self.err(SmilesErrorKind::InvalidBracketAtom));
        };
        if first == b'*' {
            return Err(self.err(SmilesErrorKind::UnsupportedWildcard));
        }
        if first.is_ascii_lowercase() {
            for len in [2, 1] {
                if let Some(sym) = rest.get(..len).and_then(|s| std::str::from_utf8(s).ok()) {
                    if let Some(element) = elements::aromatic_symbol(sym) {
                        self.pos += len;
                        return Ok((element, true));
                    }
                }
            }
            let name = String::from_utf8_lossy(&rest[..1]).into_owned();
            return Err(self.err(SmilesErrorKind::UnknownElement(name)));
        }
        if !first.is_ascii_uppercase() {
            return Err(self.err(SmilesErrorKind::InvalidBracketAtom));
        }
        if let Some(&second) = rest.get(1) {
            if second.is_ascii_lowercase() {
                let sym = std::str::from_utf8(&rest[..2]).unwrap_or_default();
                if let Some(element) = elements::lookup(sym) {
                    self.pos += 2;
                    return Ok((element, false));
                }
            }
        }
        let sym = std::str::from_utf8(&rest[..1]).unwrap_or_default();
        match elements::lookup(sym) {
            Some(element) => {
                self.pos += 1;
                Ok((element, false))
            }
            None => {
                let len = if rest.get(1).is_some_and(u8::is_ascii_lowercase) { 2 } else { 1 };
                let name = String::from_utf8_lossy(&rest[..len]).into_owned();
                Err(self.err(SmilesErrorKind::UnknownElement(name)))
            }
        }
    }

    fn assign_implicit_hydrogens(&mut self) {
        let mut sums = vec![0u32; self.atoms.len()];
        for bond in &self.bonds {
            sums[bond.a] += bond.order.valence();
            sums[bond.b] += bond.order.valence();
        }
        for (atom, sum) in self.atoms.iter_mut().zip(sums) {
            if atom.bracket {
                continue;
            }
            if let Some(valences) = elements::organic_valences(atom.element) {
                atom.implicit_h = implicit_hydrogens(valences, atom.aromatic, sum);
            }
        }
    }
}

/// Molar mass in g/mol from standard atomic weights, hydrogens included.
/// Isotope-labelled atoms use their mass number.
pub fn molar_mass(molecule: &Molecule) -> Result<f64, MassError> {
    let h = elements::atomic_weight("H").expect("hydrogen in table");
    let mut total = 0.0;
    for atom in &molecule.atoms {
        let w = match atom.isotope {
            Some(iso) => f64::from(iso),
            None => elements::atomic_weight(atom.element)
                .ok_or_else(|| MassError::UnknownElement(atom.element.to_string()))?,
        };
        total += w + h * f64::from(atom.total_h());
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MassError {
    #[error("no atomic weight for element {0}")]
    UnknownElement(String),
}
