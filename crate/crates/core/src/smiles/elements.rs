//! Periodic table lookup: symbols, organic-subset valences and standard
//! atomic weights (abridged IUPAC values, 5 significant figures).
//!
//! Elements without a standard atomic weight carry the mass number of their
//! longest-lived isotope.

/// (symbol, atomic weight)
const TABLE: &[(&str, f64)] = &[
    ("H", 1.0080),
    ("He", 4.0026),
    ("Li", 6.9400),
    ("Be", 9.0122),
    ("B", 10.810),
    ("C", 12.011),
    ("N", 14.007),
    ("O", 15.999),
    ("F", 18.998),
    ("Ne", 20.180),
    ("Na", 22.990),
    ("Mg", 24.305),
    ("Al", 26.982),
    ("Si", 28.085),
    ("P", 30.974),
    ("S", 32.060),
    ("Cl", 35.450),
    ("Ar", 39.950),
    ("K", 39.098),
    ("Ca", 40.078),
    ("Sc", 44.956),
    ("Ti", 47.867),
    ("V", 50.942),
    ("Cr", 51.996),
    ("Mn", 54.938),
    ("Fe", 55.845),
    ("Co", 58.933),
    ("Ni", 58.693),
    ("Cu", 63.546),
    ("Zn", 65.380),
    ("Ga", 69.723),
    ("Ge", 72.630),
    ("As", 74.922),
    ("Se", 78.971),
    ("Br", 79.904),
    ("Kr", 83.798),
    ("Rb", 85.468),
    ("Sr", 87.620),
    ("Y", 88.906),
    ("Zr", 91.224),
    ("Nb", 92.906),
    ("Mo", 95.950),
    ("Tc", 98.000),
    ("Ru", 101.07),
    ("Rh", 102.91),
    ("Pd", 106.42),
    ("Ag", 107.87),
    ("Cd", 112.41),
    ("In", 114.82),
    ("Sn", 118.71),
    ("Sb", 121.76),
    ("Te", 127.60),
    ("I", 126.90),
    ("Xe", 131.29),
    ("Cs", 132.91),
    ("Ba", 137.33),
    ("La", 138.91),
    ("Ce", 140.12),
    ("Pr", 140.91),
    ("Nd", 144.24),
    ("Pm", 145.00),
    ("Sm", 150.36),
    ("Eu", 151.96),
    ("Gd", 157.25),
    ("Tb", 158.93),
    ("Dy", 162.50),
    ("Ho", 164.93),
    ("Er", 167.26),
    ("Tm", 168.93),
    ("Yb", 173.05),
    ("Lu", 174.97),
    ("Hf", 178.49),
    ("Ta", 180.95),
    ("W", 183.84),
    ("Re", 186.21),
    ("Os", 190.23),
    ("Ir", 192.22),
    ("Pt", 195.08),
    ("Au", 196.97),
    ("Hg", 200.59),
    ("Tl", 204.38),
    ("Pb", 207.20),
    ("Bi", 208.98),
    ("Po", 209.00),
    ("At", 210.00),
    ("Rn", 222.00),
    ("Fr", 223.00),
    ("Ra", 226.00),
    ("Ac", 227.00),
    ("Th", 232.04),
    ("Pa", 231.04),
    ("U", 238.03),
    ("Np", 237.00),
    ("Pu", 244.00),
    ("Am", 243.00),
    ("Cm", 247.00),
    ("Bk", 247.00),
    ("Cf", 251.00),
    ("Es", 252.00),
    ("Fm", 257.00),
    ("Md", 258.00),
    ("No", 259.00),
    ("Lr", 266.00),
    ("Rf", 267.00),
    ("Db", 268.00),
    ("Sg", 269.00),
    ("Bh", 270.00),
    ("Hs", 277.00),
    ("Mt", 278.00),
    ("Ds", 281.00),
    ("Rg", 282.00),
    ("Cn", 285.00),
    ("Nh", 286.00),
    ("Fl", 289.00),
    ("Mc", 290.00),
    ("Lv", 293.00),
    ("Ts", 294.00),
    ("Og", 294.00),
];

/// Canonical symbol for `symbol` if it names a known element.
pub fn lookup(symbol: &str) -> Option<&'static str> {
    TABLE.iter().find(|(s, _)| *s == symbol).map(|(s, _)| *s)
}

pub fn is_element(symbol: &str) -> bool {
    lookup(symbol).is_some()
}

pub fn atomic_weight(symbol: &str) -> Option<f64> {
    TABLE.iter().find(|(s, _)| *s == symbol).map(|(_, w)| *w)
}

/// Standard valences for the SMILES organic subset.
pub fn organic_valences(symbol: &str) -> Option<&'static [u32]> {
    Some(match symbol {
        "B" => &[3],
        "C" => &[4],
        "N" => &[3],
        "O" => &[2],
        "P" => &[3, 5],
        "S" => &[2, 4, 6],
        "F" | "Cl" | "Br" | "I" => &[1],
        _ => return None,
    })
}

/// Symbols that may appear in lowercase (aromatic) form.
pub fn aromatic_symbol(lower: &str) -> Option<&'static str> {
    Some(match lower {
        "b" => "B",
        "c" => "C",
        "n" => "N",
        "o" => "O",
        "p" => "P",
        "s" => "S",
        "se" => "Se",
        "as" => "As",
        "te" => "Te",
        _ => return None,
    })
}
