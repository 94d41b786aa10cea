//! Reaction-center edits: the bond and atom changes that turn the product
//! into the synthons.

use std::collections::BTreeSet;

use mars_chem::{kekulize, BondOrder, BondType, MolGraph, ObjectKind};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::record::ReactionRecord;

/// New state of an edited object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EditState {
    Bond(BondType),
    /// Formal-charge change of an atom, in {-1, 0, +1}. A zero change marks
    /// an atom whose hydrogens or substituents change.
    Atom(i8),
}

/// Number of state slots scored by the model for either kind of object.
pub const STATE_SLOTS: usize = 4;

impl EditState {
    /// Slot in the 4-way state classifier. Atom states use
    /// {0: no charge change, 1: +1, 2: -1}; slot 3 is never an atom state.
    pub fn slot(self) -> usize {
        match self {
            EditState::Bond(t) => t.slot(),
            EditState::Atom(0) => 0,
            EditState::Atom(1) => 1,
            EditState::Atom(-1) => 2,
            EditState::Atom(d) => panic!("atom charge delta {d} has no slot"),
        }
    }

    pub fn from_slot(kind: ObjectKind, slot: usize) -> Option<EditState> {
        match (kind, slot) {
            (ObjectKind::Bond, s) => BondType::from_slot(s).map(EditState::Bond),
            (ObjectKind::Atom, 0) => Some(EditState::Atom(0)),
            (ObjectKind::Atom, 1) => Some(EditState::Atom(1)),
            (ObjectKind::Atom, 2) => Some(EditState::Atom(-1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditAction {
    /// Unified object index in the product: bonds first, then atoms.
    pub object: usize,
    pub state: EditState,
}

/// Product atoms aligned with the pooled reactant graph.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub product: MolGraph,
    /// All reactants as one sanitized graph.
    pub reactants: MolGraph,
    /// `reactants` with aromatic bonds replaced by a Kekulé assignment.
    pub kekule: MolGraph,
    pub to_reactant: Vec<usize>,
    pub to_product: Vec<Option<usize>>,
}

impl Alignment {
    pub fn new(r: &ReactionRecord) -> Result<Alignment, CoreError> {
        let reactants = r.reactant_union();
        let mut kekule = reactants.clone();
        kekulize(&mut kekule, &[]).map_err(CoreError::Parse)?;
        let mut to_product = vec![None; reactants.num_atoms()];
        let mut to_reactant = Vec::with_capacity(r.product.num_atoms());
        for (v, a) in r.product.atoms().iter().enumerate() {
            let m = a.map_num.ok_or(CoreError::UnmappedProductAtom(v))?;
            let ra = reactants
                .atom_by_map(m)
                .ok_or_else(|| CoreError::MappingInconsistent(format!("product map {m} missing from reactants")))?;
            to_reactant.push(ra);
            to_product[ra] = Some(v);
        }
        Ok(Alignment { product: r.product.clone(), reactants, kekule, to_reactant, to_product })
    }

    pub fn is_synthon_atom(&self, reactant_atom: usize) -> bool {
        self.to_product[reactant_atom].is_some()
    }

    /// Hydrogen count a reactant atom would receive from the lowest valence
    /// that fits its Kekulé bonds.
    pub fn lowest_fill_hydrogens(&self, reactant_atom: usize) -> Option<u32> {
        let a = self.kekule.atom(reactant_atom);
        let used: u32 = self
            .kekule
            .neighbors(reactant_atom)
            .iter()
            .map(|&(_, b)| self.kekule.bond(b).order.integer().unwrap_or(1))
            .sum();
        a.element.target_valence(a.formal_charge, used).map(|t| t - used)
    }

    /// Fails when a reactant atom that will receive recomputed hydrogens
    /// carries a count different from the lowest valence fill.
    pub fn check_standard_valence(&self, reactant_atom: usize) -> Result<(), CoreError> {
        let a = self.reactants.atom(reactant_atom);
        if a.element.is_metal() {
            return Ok(());
        }
        match self.lowest_fill_hydrogens(reactant_atom) {
            Some(h) if h == a.hydrogens as u32 => Ok(()),
            _ => Err(CoreError::NonStandardValence(self.to_product[reactant_atom].unwrap_or(reactant_atom))),
        }
    }
}

/// Edits and attachment atoms of one reaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSet {
    /// Sorted by object index.
    pub edits: Vec<EditAction>,
    /// Product atom indices, ascending.
    pub attachments: Vec<usize>,
}

fn bond_type(order: BondOrder) -> BondType {
    match order {
        BondOrder::Single => BondType::Single,
        BondOrder::Double => BondType::Double,
        BondOrder::Triple => BondType::Triple,
        BondOrder::Aromatic => unreachable!("Kekulé graph has no aromatic bonds"),
    }
}

pub fn compute_edits(r: &ReactionRecord) -> Result<EditSet, CoreError> {
    compute_edits_aligned(&Alignment::new(r)?)
}

pub fn compute_edits_aligned(al: &Alignment) -> Result<EditSet, CoreError> {
    let p = &al.product;
    let m = p.num_bonds();
    let mut edits = Vec::new();
    let mut endpoints = BTreeSet::new();
    for (b, bond) in p.bonds().iter().enumerate() {
        let (ru, rv) = (al.to_reactant[bond.begin], al.to_reactant[bond.end]);
        let new = match al.reactants.bond_between(ru, rv) {
            None => Some(BondType::None),
            Some(rb) => {
                let r_order = al.reactants.bond(rb).order;
                if r_order == bond.order {
                    None
                } else {
                    let t = bond_type(al.kekule.bond(rb).order);
                    (t.order() != Some(bond.order)).then_some(t)
                }
            }
        };
        if let Some(t) = new {
            edits.push(EditAction { object: b, state: EditState::Bond(t) });
            endpoints.insert(bond.begin);
            endpoints.insert(bond.end);
        }
    }
    for rb in al.reactants.bonds() {
        if let (Some(u), Some(v)) = (al.to_product[rb.begin], al.to_product[rb.end]) {
            if p.bond_between(u, v).is_none() {
                return Err(CoreError::BondAddition(u.min(v), u.max(v)));
            }
        }
    }
    let mut attachments = endpoints.clone();
    for v in 0..p.num_atoms() {
        let pa = p.atom(v);
        let ra_idx = al.to_reactant[v];
        let ra = al.reactants.atom(ra_idx);
        let delta = ra.formal_charge - pa.formal_charge;
        if delta.abs() > 1 {
            return Err(CoreError::UnsupportedChargeChange { atom: v, delta });
        }
        let edited = if endpoints.contains(&v) {
            delta != 0
        } else {
            delta != 0
                || ra.hydrogens != pa.hydrogens
                || al.reactants.neighbors(ra_idx).iter().any(|&(u, _)| !al.is_synthon_atom(u))
        };
        if edited {
            edits.push(EditAction { object: m + v, state: EditState::Atom(delta) });
            attachments.insert(v);
        }
    }
    if edits.is_empty() {
        return Err(CoreError::NoEditFound);
    }
    for &a in &attachments {
        al.check_standard_valence(al.to_reactant[a])?;
    }
    Ok(EditSet { edits, attachments: attachments.into_iter().collect() })
}
