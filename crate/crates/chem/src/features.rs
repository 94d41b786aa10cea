//! Atom and bond feature vectors.

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::ChemError;
use crate::graph::{BondOrder, Hybridization, MolGraph};

pub const ELEMENT_SLOTS: usize = 17;
pub const DEGREE_SLOTS: usize = 7;
pub const CHARGE_SLOTS: usize = 5;
pub const CHIRAL_SLOTS: usize = 4;
pub const HYDROGEN_SLOTS: usize = 5;
pub const HYBRID_SLOTS: usize = 5;
pub const CLASS_SLOTS: usize = 10;
pub const ATOM_FEATURES: usize =
    ELEMENT_SLOTS + DEGREE_SLOTS + CHARGE_SLOTS + CHIRAL_SLOTS + HYDROGEN_SLOTS + HYBRID_SLOTS + 2;
pub const BOND_FEATURES: usize = 4 + 1 + 1 + 6;

/// The ordered list of element types with a one-hot slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSet {
    elements: Vec<Element>,
}

const DEFAULT_ELEMENTS: [&str; ELEMENT_SLOTS] =
    ["C", "O", "N", "F", "Cl", "S", "Br", "B", "I", "P", "Si", "Sn", "Li", "Mg", "Zn", "Se", "Cu"];

impl Default for ElementSet {
    fn default() -> Self {
        ElementSet {
            elements: DEFAULT_ELEMENTS.iter().map(|s| Element::from_symbol(s).expect("in table")).collect(),
        }
    }
}

impl ElementSet {
    pub fn new(elements: Vec<Element>) -> Result<ElementSet, String> {
        if elements.len() != ELEMENT_SLOTS {
            return Err(format!("expected {ELEMENT_SLOTS} elements, got {}", elements.len()));
        }
        let mut sorted = elements.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != elements.len() {
            return Err("duplicate element in set".into());
        }
        Ok(ElementSet { elements })
    }

    /// The most frequent elements of a corpus, by descending count then
    /// atomic number, padded from the default list when fewer than 17 occur.
    pub fn from_counts(counts: &[(Element, usize)]) -> ElementSet {
        let mut sorted: Vec<(Element, usize)> = counts.iter().copied().filter(|c| c.1 > 0).collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut elements: Vec<Element> = sorted.into_iter().map(|c| c.0).take(ELEMENT_SLOTS).collect();
        for e in ElementSet::default().elements {
            if elements.len() == ELEMENT_SLOTS {
                break;
            }
            if !elements.contains(&e) {
                elements.push(e);
            }
        }
        ElementSet { elements }
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn slot(&self, e: Element) -> Option<usize> {
        self.elements.iter().position(|&x| x == e)
    }

    pub fn contains(&self, e: Element) -> bool {
        self.slot(e).is_some()
    }

    /// Fails on the first atom whose element has no slot.
    pub fn check(&self, g: &MolGraph) -> Result<(), ChemError> {
        match g.atoms().iter().find(|a| !self.contains(a.element)) {
            Some(a) => Err(ChemError::UnsupportedElement(a.element.symbol().to_string())),
            None => Ok(()),
        }
    }
}

/// Row-major feature matrices for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVectors {
    pub atom_width: usize,
    pub atoms: Vec<f64>,
    pub bonds: Vec<f64>,
}

impl FeatureVectors {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len() / self.atom_width
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len() / BOND_FEATURES
    }

    pub fn atom(&self, v: usize) -> &[f64] {
        &self.atoms[v * self.atom_width..(v + 1) * self.atom_width]
    }

    pub fn bond(&self, b: usize) -> &[f64] {
        &self.bonds[b * BOND_FEATURES..(b + 1) * BOND_FEATURES]
    }
}

pub fn atom_feature_width(with_class: bool) -> usize {
    ATOM_FEATURES + if with_class { CLASS_SLOTS } else { 0 }
}

fn hybrid_slot(h: Hybridization) -> usize {
    match h {
        Hybridization::Sp => 0,
        Hybridization::Sp2 => 1,
        Hybridization::Sp3 => 2,
        Hybridization::Sp3d => 3,
        Hybridization::Sp3d2 => 4,
    }
}

/// Atom and bond features of a sanitized graph. `reaction_class` (1..=10)
/// appends a one-hot class segment to every atom row.
pub fn featurize(g: &MolGraph, elements: &ElementSet, reaction_class: Option<u8>) -> Result<FeatureVectors, ChemError> {
    if let Some(c) = reaction_class {
        if !(1..=10).contains(&c) {
            return Err(ChemError::IndexOutOfRange { kind: crate::graph::ObjectKind::Atom, index: c as usize });
        }
    }
    let width = atom_feature_width(reaction_class.is_some());
    let mut atoms = vec![0.0; g.num_atoms() * width];
    for (v, a) in g.atoms().iter().enumerate() {
        let row = &mut atoms[v * width..(v + 1) * width];
        let slot = elements.slot(a.element).ok_or_else(|| ChemError::UnsupportedElement(a.element.symbol().into()))?;
        let mut off = 0;
        row[off + slot] = 1.0;
        off += ELEMENT_SLOTS;
        row[off + g.degree(v).min(DEGREE_SLOTS - 1)] = 1.0;
        off += DEGREE_SLOTS;
        row[off + (a.formal_charge.clamp(-2, 2) + 2) as usize] = 1.0;
        off += CHARGE_SLOTS;
        row[off + a.chiral.slot()] = 1.0;
        off += CHIRAL_SLOTS;
        row[off + (a.hydrogens as usize).min(HYDROGEN_SLOTS - 1)] = 1.0;
        off += HYDROGEN_SLOTS;
        row[off + hybrid_slot(g.hybridization(v))] = 1.0;
        off += HYBRID_SLOTS;
        row[off] = if a.aromatic { 1.0 } else { 0.0 };
        row[off + 1] = a.element.mass() / 100.0;
        off += 2;
        if let Some(c) = reaction_class {
            row[off + c as usize - 1] = 1.0;
        }
    }
    let mut bonds = vec![0.0; g.num_bonds() * BOND_FEATURES];
    for (b, bond) in g.bonds().iter().enumerate() {
        let row = &mut bonds[b * BOND_FEATURES..(b + 1) * BOND_FEATURES];
        let t = match bond.order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        row[t] = 1.0;
        row[4] = if bond.conjugated { 1.0 } else { 0.0 };
        row[5] = if bond.in_ring { 1.0 } else { 0.0 };
        row[6 + bond.stereo.slot()] = 1.0;
    }
    Ok(FeatureVectors { atom_width: width, atoms, bonds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn widths_follow_the_tables() {
        assert_eq!(ATOM_FEATURES, 45);
        assert_eq!(BOND_FEATURES, 12);
        assert_eq!(atom_feature_width(true), 55);
    }

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        let f = featurize(&g, &ElementSet::default(), None).unwrap();
        let row = f.atom(0);
        assert_eq!(row[0], 1.0);
        assert_eq!(row[ELEMENT_SLOTS], 1.0, "degree 0");
        let h = ELEMENT_SLOTS + DEGREE_SLOTS + CHARGE_SLOTS + CHIRAL_SLOTS;
        assert_eq!(row[h + 4], 1.0, "four hydrogens");
    }

    #[test]
    fn benzene_bond() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let f = featurize(&g, &ElementSet::default(), None).unwrap();
        assert_eq!(&f.bond(0)[..6], &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn class_segment() {
        let g = parse_smiles("CCO").unwrap();
        let f = featurize(&g, &ElementSet::default(), Some(6)).unwrap();
        for v in 0..3 {
            let row = f.atom(v);
            assert_eq!(row.len(), 55);
            let class = &row[45..];
            assert_eq!(class.iter().sum::<f64>(), 1.0);
            assert_eq!(class[5], 1.0);
        }
    }

    #[test]
    fn from_counts_pads_with_defaults() {
        let set = ElementSet::from_counts(&[(Element::N, 5), (Element::C, 9)]);
        assert_eq!(set.elements()[0], Element::C);
        assert_eq!(set.elements()[1], Element::N);
        assert_eq!(set.elements().len(), ELEMENT_SLOTS);
    }
}
