use crate::element::Element;
use crate::error::ChemError;
use crate::graph::{BondOrder, MolGraph};
use crate::rings::{cyclic_bonds, find_sssr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValenceMode {
    /// Valence violations are errors.
    #[default]
    Strict,
    /// Valence violations are tolerated; hydrogen counts are clamped at zero.
    Relaxed,
}

#[derive(Debug, Clone, Default)]
pub struct SanitizeOptions {
    pub mode: ValenceMode,
    /// Atoms whose hydrogen count is recomputed from the valence table
    /// instead of being taken as given.
    pub flexible: Vec<usize>,
}

/// Kekulizes, completes hydrogens, checks valences, perceives rings and
/// aromaticity, and sets ring and conjugation flags.
pub fn sanitize(g: &mut MolGraph) -> Result<(), ChemError> {
    sanitize_with(g, &SanitizeOptions::default())
}

pub fn sanitize_with(g: &mut MolGraph, opts: &SanitizeOptions) -> Result<(), ChemError> {
    let mut flexible = vec![false; g.num_atoms()];
    for &v in &opts.flexible {
        flexible[v] = true;
    }
    kekulize(g, &flexible)?;
    for (v, &flex) in flexible.iter().enumerate() {
        let used = bond_order_sum(g, v);
        let atom = g.atom(v);
        if flex {
            let h = atom.element.target_valence(atom.formal_charge, used).map_or(0, |t| t - used);
            g.atom_mut(v).hydrogens = h as u8;
        }
        check_valence(g, v, opts.mode)?;
    }
    g.rings = find_sssr(g);
    let cyclic = cyclic_bonds(g);
    for (b, c) in cyclic.into_iter().enumerate() {
        g.bond_mut(b).in_ring = c;
    }
    perceive_aromaticity(g);
    assign_conjugation(g);
    Ok(())
}

fn bond_order_sum(g: &MolGraph, v: usize) -> u32 {
    g.neighbors(v).iter().map(|&(_, b)| g.bond(b).order.integer().unwrap_or(1)).sum()
}

fn check_valence(g: &MolGraph, v: usize, mode: ValenceMode) -> Result<(), ChemError> {
    let atom = g.atom(v);
    if atom.element.is_metal() {
        return Ok(());
    }
    let total = bond_order_sum(g, v) + atom.hydrogens as u32;
    let allowed = atom.element.allowed_valences(atom.formal_charge);
    if allowed.iter().any(|&a| a as u32 == total) || mode == ValenceMode::Relaxed {
        return Ok(());
    }
    Err(ChemError::Valence { atom: v, element: atom.element.symbol().to_string(), valence: total })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Skip,
    Optional,
    Required,
}

/// Replaces aromatic bond orders with an alternating single/double assignment.
pub fn kekulize(g: &mut MolGraph, flexible: &[bool]) -> Result<(), ChemError> {
    let n = g.num_atoms();
    let has_aromatic = (0..g.num_bonds()).any(|b| g.bond(b).order == BondOrder::Aromatic);
    if !has_aromatic {
        return Ok(());
    }
    let mut role = vec![Role::Skip; n];
    for (v, slot) in role.iter_mut().enumerate() {
        let n_arom = g.neighbors(v).iter().filter(|&&(_, b)| g.bond(b).order == BondOrder::Aromatic).count();
        if n_arom == 0 {
            continue;
        }
        let atom = g.atom(v);
        let (explicit, aromatic) = g.explicit_valence_lower(v);
        if flexible.get(v).copied().unwrap_or(false) {
            let used = explicit + aromatic;
            let capacity = atom.element.target_valence(atom.formal_charge, used).map_or(0, |t| t - used);
            if capacity >= 1 {
                let carbon_like = atom.element == Element::C && atom.formal_charge == 0
                    || atom.element == Element::N && atom.formal_charge == 1
                    || atom.element == Element::B && atom.formal_charge == 0;
                *slot = if carbon_like { Role::Required } else { Role::Optional };
            }
        } else {
            let used = explicit + aromatic + atom.hydrogens as u32;
            let Some(target) = atom.element.target_valence(atom.formal_charge, used) else {
                return Err(ChemError::Kekulize { atom: v });
            };
            match target - used {
                0 => {}
                1 => *slot = Role::Required,
                _ => return Err(ChemError::Kekulize { atom: v }),
            }
        }
    }

    let mut mate: Vec<Option<usize>> = vec![None; n];
    let candidates: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|v| {
            if role[v] == Role::Skip {
                return Vec::new();
            }
            let mut nbrs: Vec<(usize, usize)> = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&(u, b)| g.bond(b).order == BondOrder::Aromatic && role[u] != Role::Skip)
                .collect();
            nbrs.sort_unstable();
            nbrs
        })
        .collect();
    let mut budget = 200_000usize;
    if !match_required(&role, &candidates, &mut mate, &mut budget) {
        let atom = (0..n).find(|&v| role[v] == Role::Required && mate[v].is_none()).unwrap_or(0);
        return Err(ChemError::Kekulize { atom });
    }
    for b in 0..g.num_bonds() {
        let bond = g.bond(b);
        if bond.order != BondOrder::Aromatic {
            continue;
        }
        let double = mate[bond.begin].is_some_and(|u| u == bond.end);
        g.bond_mut(b).order = if double { BondOrder::Double } else { BondOrder::Single };
    }
    for v in 0..n {
        g.atom_mut(v).aromatic = false;
    }
    Ok(())
}

fn match_required(
    role: &[Role],
    candidates: &[Vec<(usize, usize)>],
    mate: &mut [Option<usize>],
    budget: &mut usize,
) -> bool {
    let Some(v) = (0..role.len()).find(|&v| role[v] == Role::Required && mate[v].is_none()) else {
        return true;
    };
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    // Prefer required partners so optional atoms stay unmatched when possible.
    for pass in [Role::Required, Role::Optional] {
        for &(u, _) in &candidates[v] {
            if role[u] != pass || mate[u].is_some() {
                continue;
            }
            mate[v] = Some(u);
            mate[u] = Some(v);
            if match_required(role, candidates, mate, budget) {
                return true;
            }
            mate[v] = None;
            mate[u] = None;
        }
    }
    false
}

/// Pi-electron contribution of ring atom `v`, or `None` if it cannot be part
/// of an aromatic ring.
fn pi_electrons(g: &MolGraph, v: usize, ring_atom: &[bool]) -> Option<u32> {
    let atom = g.atom(v);
    let degree = g.degree(v) as u32 + atom.hydrogens as u32;
    if degree > 3 {
        return None;
    }
    let mut ring_double = false;
    let mut exo_double = None;
    for &(u, b) in g.neighbors(v) {
        match g.bond(b).order {
            BondOrder::Triple => return None,
            BondOrder::Double | BondOrder::Aromatic => {
                if ring_atom[u] && g.bond(b).in_ring {
                    ring_double = true;
                } else {
                    exo_double = Some(u);
                }
            }
            BondOrder::Single => {}
        }
    }
    if ring_double {
        return Some(1);
    }
    if let Some(u) = exo_double {
        let partner = g.atom(u).element;
        let electronegative = matches!(partner, Element::N | Element::O | Element::S);
        return (electronegative && atom.element != partner).then_some(0);
    }
    let e = atom.element;
    let c = atom.formal_charge;
    match (e.atomic_number(), c) {
        (7 | 15, 0) if degree == 3 => Some(2),
        (8 | 16 | 34, 0) if degree == 2 => Some(2),
        (6, -1) if degree == 3 => Some(2),
        (7, -1) if degree == 2 => Some(2),
        (6, 1) => Some(0),
        (5, 0) if degree == 3 => Some(0),
        _ => None,
    }
}

fn ring_bonds(g: &MolGraph, ring: &[usize]) -> Vec<usize> {
    (0..ring.len())
        .map(|i| g.bond_between(ring[i], ring[(i + 1) % ring.len()]).expect("ring follows bonds"))
        .collect()
}

fn huckel(total: u32) -> bool {
    total >= 2 && (total - 2).is_multiple_of(4)
}

/// Marks atoms and bonds of 4n+2 rings (single SSSR rings and fused pairs)
/// as aromatic. Expects kekulé bond orders.
pub fn perceive_aromaticity(g: &mut MolGraph) {
    let n = g.num_atoms();
    let mut ring_atom = vec![false; n];
    for ring in &g.rings {
        for &v in ring {
            ring_atom[v] = true;
        }
    }
    let electrons: Vec<Option<u32>> =
        (0..n).map(|v| if ring_atom[v] { pi_electrons(g, v, &ring_atom) } else { None }).collect();
    let rings = g.rings.clone();
    let bonds: Vec<Vec<usize>> = rings.iter().map(|r| ring_bonds(g, r)).collect();
    let count = |atoms: &mut dyn Iterator<Item = &usize>| -> Option<u32> {
        let mut total = 0;
        for &v in atoms {
            total += electrons[v]?;
        }
        Some(total)
    };

    let mut aromatic_ring = vec![false; rings.len()];
    for (i, ring) in rings.iter().enumerate() {
        if count(&mut ring.iter()).is_some_and(huckel) {
            aromatic_ring[i] = true;
        }
    }
    let mut fused_bonds: Vec<usize> = Vec::new();
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            if aromatic_ring[i] && aromatic_ring[j] {
                continue;
            }
            let shared = bonds[i].iter().filter(|b| bonds[j].contains(b)).count();
            if shared == 0 {
                continue;
            }
            let mut union: Vec<usize> = rings[i].iter().chain(&rings[j]).copied().collect();
            union.sort_unstable();
            union.dedup();
            if count(&mut union.iter()).is_some_and(huckel) {
                fused_bonds.extend(&bonds[i]);
                fused_bonds.extend(&bonds[j]);
            }
        }
    }
    let mut arom_bond = vec![false; g.num_bonds()];
    for (i, is) in aromatic_ring.iter().enumerate() {
        if *is {
            for &b in &bonds[i] {
                arom_bond[b] = true;
            }
        }
    }
    for b in fused_bonds {
        arom_bond[b] = true;
    }
    for v in 0..n {
        g.atom_mut(v).aromatic = false;
    }
    for (b, is) in arom_bond.into_iter().enumerate() {
        if is {
            let (u, v) = (g.bond(b).begin, g.bond(b).end);
            g.bond_mut(b).order = BondOrder::Aromatic;
            g.atom_mut(u).aromatic = true;
            g.atom_mut(v).aromatic = true;
        }
    }
}

fn has_pi(g: &MolGraph, v: usize, skip: usize) -> bool {
    g.neighbors(v).iter().any(|&(_, b)| b != skip && g.bond(b).order != BondOrder::Single)
}

fn lone_pair(g: &MolGraph, v: usize) -> bool {
    let a = g.atom(v);
    let degree = g.degree(v) + a.hydrogens as usize;
    match (a.element.atomic_number(), a.formal_charge) {
        (7, 0) => degree <= 3,
        (8 | 16, 0) => degree <= 2,
        (8, -1) | (16, -1) | (7, -1) => true,
        (9 | 17 | 35 | 53, 0) => degree == 1,
        _ => false,
    }
}

/// A bond is conjugated if it is aromatic, or it links a pi bond to another
/// pi bond or to a lone pair.
fn assign_conjugation(g: &mut MolGraph) {
    let mut conj = vec![false; g.num_bonds()];
    for (b, c) in conj.iter_mut().enumerate() {
        let bond = g.bond(b);
        let (u, v) = (bond.begin, bond.end);
        *c = match bond.order {
            BondOrder::Aromatic => true,
            BondOrder::Double | BondOrder::Triple => [u, v].iter().any(|&x| {
                g.neighbors(x).iter().any(|&(w, wb)| {
                    wb != b && g.bond(wb).order == BondOrder::Single && (has_pi(g, w, wb) || lone_pair(g, w))
                })
            }),
            BondOrder::Single => {
                let pu = has_pi(g, u, b);
                let pv = has_pi(g, v, b);
                pu && pv || pu && lone_pair(g, v) || pv && lone_pair(g, u)
            }
        };
    }
    for (b, c) in conj.into_iter().enumerate() {
        g.bond_mut(b).conjugated = c;
    }
}
