use std::fmt;

use serde::{Deserialize, Serialize};

/// A chemical element, identified by atomic number.
///
/// Only elements with an entry in the internal valence table can be
/// constructed; everything else is rejected by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Element(u8);

struct ElementInfo {
    symbol: &'static str,
    number: u8,
    mass: f64,
    valences: &'static [u8],
    organic: bool,
    metal: bool,
}

const fn info(
    symbol: &'static str,
    number: u8,
    mass: f64,
    valences: &'static [u8],
    organic: bool,
    metal: bool,
) -> ElementInfo {
    ElementInfo { symbol, number, mass, valences, organic, metal }
}

const TABLE: &[ElementInfo] = &[
    info("H", 1, 1.008, &[1], false, false),
    info("Li", 3, 6.94, &[1], false, true),
    info("Be", 4, 9.012, &[2], false, true),
    info("B", 5, 10.81, &[3], true, false),
    info("C", 6, 12.011, &[4], true, false),
    info("N", 7, 14.007, &[3, 5], true, false),
    info("O", 8, 15.999, &[2], true, false),
    info("F", 9, 18.998, &[1], true, false),
    info("Na", 11, 22.990, &[1], false, true),
    info("Mg", 12, 24.305, &[2], false, true),
    info("Al", 13, 26.982, &[3], false, true),
    info("Si", 14, 28.085, &[4], false, false),
    info("P", 15, 30.974, &[3, 5], true, false),
    info("S", 16, 32.06, &[2, 4, 6], true, false),
    info("Cl", 17, 35.45, &[1, 3, 5, 7], true, false),
    info("K", 19, 39.098, &[1], false, true),
    info("Ca", 20, 40.078, &[2], false, true),
    info("Ti", 22, 47.867, &[2, 3, 4], false, true),
    info("Cr", 24, 51.996, &[2, 3, 6], false, true),
    info("Mn", 25, 54.938, &[2, 3, 4, 6, 7], false, true),
    info("Fe", 26, 55.845, &[2, 3], false, true),
    info("Co", 27, 58.933, &[2, 3], false, true),
    info("Ni", 28, 58.693, &[2, 3], false, true),
    info("Cu", 29, 63.546, &[1, 2], false, true),
    info("Zn", 30, 65.38, &[2], false, true),
    info("Ge", 32, 72.630, &[4], false, false),
    info("As", 33, 74.922, &[3, 5], false, false),
    info("Se", 34, 78.971, &[2, 4, 6], false, false),
    info("Br", 35, 79.904, &[1, 3, 5], true, false),
    info("Pd", 46, 106.42, &[0, 2, 4], false, true),
    info("Ag", 47, 107.868, &[1], false, true),
    info("Sn", 50, 118.710, &[2, 4], false, true),
    info("Sb", 51, 121.760, &[3, 5], false, false),
    info("Te", 52, 127.60, &[2, 4, 6], false, false),
    info("I", 53, 126.904, &[1, 3, 5, 7], true, false),
    info("Cs", 55, 132.905, &[1], false, true),
    info("Pt", 78, 195.084, &[2, 4], false, true),
    info("Au", 79, 196.967, &[1, 3], false, true),
    info("Hg", 80, 200.592, &[1, 2], false, true),
    info("Bi", 83, 208.980, &[3, 5], false, true),
];

fn lookup(number: u8) -> &'static ElementInfo {
    TABLE
        .iter()
        .find(|e| e.number == number)
        .expect("Element is only constructed from table entries")
}

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const SE: Element = Element(34);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_number(number: u8) -> Option<Element> {
        TABLE.iter().any(|e| e.number == number).then_some(Element(number))
    }

    /// Case-sensitive symbol lookup ("Cl", not "CL").
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        TABLE.iter().find(|e| e.symbol == symbol).map(|e| Element(e.number))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        lookup(self.0).symbol
    }

    pub fn mass(self) -> f64 {
        lookup(self.0).mass
    }

    /// Member of the SMILES organic subset (may be written without brackets).
    pub fn is_organic_subset(self) -> bool {
        lookup(self.0).organic
    }

    /// Elements that may be written as lowercase aromatic symbols without brackets.
    pub fn is_aromatic_organic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16)
    }

    pub fn is_metal(self) -> bool {
        lookup(self.0).metal
    }

    /// Allowed total valences (bond orders plus hydrogens) for the element
    /// carrying `charge`.
    ///
    /// Main-group atoms use the valences of the isoelectronic neutral element
    /// in the same period (N+ behaves like C, O- like F). Metals lose one
    /// valence unit per unit of charge.
    pub fn allowed_valences(self, charge: i8) -> Vec<u8> {
        let entry = lookup(self.0);
        if charge == 0 {
            return entry.valences.to_vec();
        }
        if entry.metal || self.0 == 1 {
            let shifted: Vec<u8> = entry
                .valences
                .iter()
                .filter_map(|&v| {
                    let v = v as i16 - (charge as i16).abs();
                    (v >= 0).then_some(v as u8)
                })
                .collect();
            return if shifted.is_empty() { vec![0] } else { shifted };
        }
        let effective = self.0 as i16 - charge as i16;
        let (lo, hi, first_group) = period_bounds(self.0);
        if effective < lo || effective > hi {
            return Vec::new();
        }
        main_group_valences(first_group + effective - lo, lo == 3)
    }

    /// Smallest allowed valence that can accommodate `used` bond-order units.
    pub fn target_valence(self, charge: i8, used: u32) -> Option<u32> {
        self.allowed_valences(charge)
            .into_iter()
            .map(u32::from)
            .find(|&v| v >= used)
    }

    pub fn max_valence(self, charge: i8) -> Option<u32> {
        self.allowed_valences(charge).into_iter().map(u32::from).max()
    }
}

/// First and last atomic number of the main-group block containing `number`,
/// together with the group number of the first entry.
fn period_bounds(number: u8) -> (i16, i16, i16) {
    match number {
        3..=10 => (3, 10, 1),
        11..=18 => (11, 18, 1),
        31..=36 => (31, 36, 3),
        49..=54 => (49, 54, 3),
        _ => (number as i16, number as i16, 0),
    }
}

/// Valences of a neutral main-group atom in `group` (1..=8).
fn main_group_valences(group: i16, period_two: bool) -> Vec<u8> {
    match (group, period_two) {
        (1, _) => vec![1],
        (2, _) => vec![2],
        (3, _) => vec![3],
        (4, _) => vec![4],
        (5, true) => vec![3],
        (5, false) => vec![3, 5],
        (6, true) => vec![2],
        (6, false) => vec![2, 4, 6],
        (7, true) => vec![1],
        (7, false) => vec![1, 3, 5, 7],
        (8, _) => vec![0],
        _ => Vec::new(),
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl TryFrom<String> for Element {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Element::from_symbol(&value).ok_or_else(|| format!("unknown element symbol {value:?}"))
    }
}

impl From<Element> for String {
    fn from(e: Element) -> String {
        e.symbol().to_string()
    }
}
