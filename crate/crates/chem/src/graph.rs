use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::ChemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ChiralTag {
    #[default]
    Unspecified,
    Clockwise,
    CounterClockwise,
    Other,
}

impl ChiralTag {
    pub fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer order for kekulé bonds; aromatic bonds have no integer order.
    pub fn integer(self) -> Option<u32> {
        match self {
            BondOrder::Single => Some(1),
            BondOrder::Double => Some(2),
            BondOrder::Triple => Some(3),
            BondOrder::Aromatic => None,
        }
    }

    pub fn from_integer(order: u32) -> Option<BondOrder> {
        match order {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BondStereo {
    #[default]
    None,
    Any,
    Z,
    E,
    Cis,
    Trans,
}

impl BondStereo {
    pub fn slot(self) -> usize {
        self as usize
    }
}

/// The 4-slot bond type vector over {none, single, double, triple}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondType {
    None,
    Single,
    Double,
    Triple,
}

impl BondType {
    pub const ALL: [BondType; 4] = [BondType::None, BondType::Single, BondType::Double, BondType::Triple];

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn from_slot(slot: usize) -> Option<BondType> {
        BondType::ALL.get(slot).copied()
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.slot()] = 1.0;
        v
    }

    pub fn order(self) -> Option<BondOrder> {
        match self {
            BondType::None => None,
            BondType::Single => Some(BondOrder::Single),
            BondType::Double => Some(BondOrder::Double),
            BondType::Triple => Some(BondOrder::Triple),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Total number of attached hydrogens.
    pub hydrogens: u8,
    pub chiral: ChiralTag,
    pub aromatic: bool,
    pub map_num: Option<u32>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            formal_charge: 0,
            hydrogens: 0,
            chiral: ChiralTag::Unspecified,
            aromatic: false,
            map_num: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
    pub conjugated: bool,
    pub in_ring: bool,
}

impl Bond {
    pub fn new(begin: usize, end: usize, order: BondOrder) -> Bond {
        Bond { begin, end, order, stereo: BondStereo::None, conjugated: false, in_ring: false }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.begin == atom || self.end == atom
    }
}

/// Which half of the unified object index an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Bond,
    Atom,
}

/// Attributed molecular graph; possibly disconnected.
///
/// Bonds and atoms share one object index space: bond `i` is object `i`,
/// atom `v` is object `m + v`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    pub(crate) rings: Vec<Vec<usize>>,
}

impl MolGraph {
    pub fn new() -> MolGraph {
        MolGraph::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, v: usize) -> &Atom {
        &self.atoms[v]
    }

    pub fn atom_mut(&mut self, v: usize) -> &mut Atom {
        &mut self.atoms[v]
    }

    pub fn bond(&self, b: usize) -> &Bond {
        &self.bonds[b]
    }

    pub fn bond_mut(&mut self, b: usize) -> &mut Bond {
        &mut self.bonds[b]
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn num_objects(&self) -> usize {
        self.atoms.len() + self.bonds.len()
    }

    /// Smallest set of smallest rings as atom cycles, valid after sanitization.
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    /// `(neighbour, bond index)` pairs of atom `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn bond_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u].iter().find(|&&(n, _)| n == v).map(|&(_, b)| b)
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, begin: usize, end: usize, order: BondOrder) -> Result<usize, ChemError> {
        if begin == end || begin >= self.atoms.len() || end >= self.atoms.len() {
            return Err(ChemError::InvalidBond { begin, end });
        }
        if self.bond_between(begin, end).is_some() {
            return Err(ChemError::DuplicateBond { begin, end });
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond::new(begin, end, order));
        self.adjacency[begin].push((end, idx));
        self.adjacency[end].push((begin, idx));
        Ok(idx)
    }

    /// Removes bond `b`. Later bond indices shift down by one.
    pub fn remove_bond(&mut self, b: usize) {
        self.bonds.remove(b);
        self.rebuild_adjacency();
    }

    /// Removes the given atoms (and their bonds), keeping the relative order of
    /// the rest. Returns the old-to-new atom index map.
    pub fn remove_atoms(&mut self, doomed: &[usize]) -> Vec<Option<usize>> {
        let mut keep = vec![true; self.atoms.len()];
        for &v in doomed {
            keep[v] = false;
        }
        let mut remap = vec![None; self.atoms.len()];
        let mut next = 0;
        for (v, k) in keep.iter().enumerate() {
            if *k {
                remap[v] = Some(next);
                next += 1;
            }
        }
        let atoms = std::mem::take(&mut self.atoms);
        self.atoms = atoms.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(a, _)| a).collect();
        let bonds = std::mem::take(&mut self.bonds);
        self.bonds = bonds
            .into_iter()
            .filter_map(|mut b| {
                let (u, v) = (remap[b.begin]?, remap[b.end]?);
                b.begin = u;
                b.end = v;
                Some(b)
            })
            .collect();
        self.rebuild_adjacency();
        self.rings.clear();
        remap
    }

    pub(crate) fn rebuild_adjacency(&mut self) {
        self.adjacency = vec![Vec::new(); self.atoms.len()];
        for (i, b) in self.bonds.iter().enumerate() {
            self.adjacency[b.begin].push((b.end, i));
            self.adjacency[b.end].push((b.begin, i));
        }
    }

    /// Sum of integer bond orders at `v`, counting aromatic bonds as 1.
    pub(crate) fn explicit_valence_lower(&self, v: usize) -> (u32, u32) {
        let mut explicit = 0;
        let mut aromatic = 0;
        for &(_, b) in &self.adjacency[v] {
            match self.bonds[b].order.integer() {
                Some(o) => explicit += o,
                None => aromatic += 1,
            }
        }
        (explicit, aromatic)
    }

    /// Connected components as sorted atom lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                for &(u, _) in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Induced subgraph on `atoms` (in the given order). Ring info is dropped.
    pub fn subgraph(&self, atoms: &[usize]) -> MolGraph {
        let mut index = vec![usize::MAX; self.atoms.len()];
        let mut g = MolGraph::new();
        for (new, &old) in atoms.iter().enumerate() {
            index[old] = new;
            g.add_atom(self.atoms[old].clone());
        }
        for b in &self.bonds {
            let (u, v) = (index[b.begin], index[b.end]);
            if u != usize::MAX && v != usize::MAX {
                let idx = g.add_bond(u, v, b.order).expect("subgraph of a valid graph");
                let nb = &mut g.bonds[idx];
                nb.stereo = b.stereo;
                nb.conjugated = b.conjugated;
                nb.in_ring = b.in_ring;
            }
        }
        g
    }

    /// Disjoint union; atoms of `other` are appended. Returns the offset.
    pub fn append(&mut self, other: &MolGraph) -> usize {
        let offset = self.atoms.len();
        for a in &other.atoms {
            self.add_atom(a.clone());
        }
        for b in &other.bonds {
            let idx = self.bonds.len();
            let mut nb = b.clone();
            nb.begin += offset;
            nb.end += offset;
            self.adjacency[nb.begin].push((nb.end, idx));
            self.adjacency[nb.end].push((nb.begin, idx));
            self.bonds.push(nb);
        }
        for r in &other.rings {
            self.rings.push(r.iter().map(|v| v + offset).collect());
        }
        offset
    }

    /// Relabels atoms so that old atom `v` becomes `perm[v]`. Bonds keep
    /// their order; endpoints are renamed.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![None; self.atoms.len()];
        for (v, &p) in perm.iter().enumerate() {
            atoms[p] = Some(self.atoms[v].clone());
        }
        let mut g = MolGraph {
            atoms: atoms.into_iter().map(|a| a.expect("perm is a permutation")).collect(),
            bonds: self
                .bonds
                .iter()
                .map(|b| {
                    let mut nb = b.clone();
                    nb.begin = perm[b.begin];
                    nb.end = perm[b.end];
                    nb
                })
                .collect(),
            adjacency: Vec::new(),
            rings: self.rings.iter().map(|r| r.iter().map(|&v| perm[v]).collect()).collect(),
        };
        g.rebuild_adjacency();
        g
    }

    pub fn clear_map_numbers(&mut self) {
        for a in &mut self.atoms {
            a.map_num = None;
        }
    }

    pub fn atom_by_map(&self, map: u32) -> Option<usize> {
        self.atoms.iter().position(|a| a.map_num == Some(map))
    }

    pub fn atom_in_ring(&self, v: usize) -> bool {
        self.rings.iter().any(|r| r.contains(&v))
    }

    /// Number of SSSR rings containing atom `v`.
    pub fn ring_count(&self, v: usize) -> usize {
        self.rings.iter().filter(|r| r.contains(&v)).count()
    }

    /// Unified object index of the `index`-th bond or atom.
    pub fn object_index(&self, kind: ObjectKind, index: usize) -> Result<usize, ChemError> {
        match kind {
            ObjectKind::Bond if index < self.bonds.len() => Ok(index),
            ObjectKind::Atom if index < self.atoms.len() => Ok(self.bonds.len() + index),
            _ => Err(ChemError::IndexOutOfRange { kind, index }),
        }
    }

    /// Inverse of [`MolGraph::object_index`].
    pub fn resolve_object(&self, object: usize) -> Result<(ObjectKind, usize), ChemError> {
        let m = self.bonds.len();
        if object < m {
            Ok((ObjectKind::Bond, object))
        } else if object < m + self.atoms.len() {
            Ok((ObjectKind::Atom, object - m))
        } else {
            Err(ChemError::IndexOutOfRange { kind: ObjectKind::Atom, index: object })
        }
    }

    pub fn hybridization(&self, v: usize) -> Hybridization {
        let atom = &self.atoms[v];
        let mut doubles = 0;
        let mut triples = 0;
        let mut aromatic = false;
        for &(_, b) in &self.adjacency[v] {
            match self.bonds[b].order {
                BondOrder::Double => doubles += 1,
                BondOrder::Triple => triples += 1,
                BondOrder::Aromatic => aromatic = true,
                BondOrder::Single => {}
            }
        }
        let steric = self.adjacency[v].len() + atom.hydrogens as usize;
        if steric >= 6 && doubles == 0 {
            Hybridization::Sp3d2
        } else if steric == 5 && doubles == 0 {
            Hybridization::Sp3d
        } else if triples > 0 || doubles >= 2 && steric <= 2 {
            Hybridization::Sp
        } else if doubles > 0 || aromatic || atom.aromatic {
            Hybridization::Sp2
        } else {
            Hybridization::Sp3
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> MolGraph {
        let mut g = MolGraph::new();
        for _ in 0..n {
            g.add_atom(Atom::new(Element::C));
        }
        for i in 1..n {
            g.add_bond(i - 1, i, BondOrder::Single).unwrap();
        }
        g
    }

    #[test]
    fn object_indices_put_bonds_first() {
        let g = chain(6);
        assert_eq!(g.num_bonds(), 5);
        assert_eq!(g.object_index(ObjectKind::Atom, 2).unwrap(), 7);
        assert_eq!(g.object_index(ObjectKind::Bond, 3).unwrap(), 3);
        assert!(g.object_index(ObjectKind::Bond, 5).is_err());
        assert_eq!(g.resolve_object(7).unwrap(), (ObjectKind::Atom, 2));
    }

    #[test]
    fn single_atom_object_index_is_zero() {
        let g = chain(1);
        assert_eq!(g.object_index(ObjectKind::Atom, 0).unwrap(), 0);
    }

    #[test]
    fn duplicate_and_self_bonds_rejected() {
        let mut g = chain(3);
        assert!(matches!(g.add_bond(0, 1, BondOrder::Double), Err(ChemError::DuplicateBond { .. })));
        assert!(g.add_bond(2, 2, BondOrder::Single).is_err());
    }

    #[test]
    fn remove_atoms_remaps() {
        let mut g = chain(4);
        let remap = g.remove_atoms(&[1]);
        assert_eq!(remap, vec![Some(0), None, Some(1), Some(2)]);
        assert_eq!(g.num_bonds(), 1);
        assert_eq!(g.components().len(), 2);
    }
}
