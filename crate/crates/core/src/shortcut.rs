//! Removal of the atom-map shortcut.
//!
//! Mapped reaction files tend to number the reaction center first, so map
//! numbers (and any atom order derived from them) leak the answer. Here the
//! product atoms are renumbered in canonical SMILES order, and the new
//! numbers are carried over to the reactants.

use std::collections::HashMap;

use mars_chem::{
    canonical_ranks, parse_smiles, symmetry_classes, write_canonical_smiles, write_ranked, MolGraph, RankOptions,
    WriteOptions,
};

use crate::error::CoreError;
use crate::record::{validate_mapping, ReactionRecord};

/// Canonical atom order of a graph, ignoring map numbers. `tiebreak`
/// orders atoms the canonical invariants cannot tell apart.
fn canonical_order(g: &MolGraph, tiebreak: Option<&[u64]>) -> Vec<usize> {
    let ranks = canonical_ranks(g, &RankOptions { use_maps: false, extra: None, tiebreak });
    write_ranked(g, &ranks, WriteOptions { strip_maps: true }).1
}

/// Reorders a product graph (maps ignored) into canonical output order.
/// Used for products given without mapping at inference time.
pub fn canonical_product(g: &MolGraph) -> MolGraph {
    let order = canonical_order(g, None);
    let mut perm = vec![0; g.num_atoms()];
    for (i, &v) in order.iter().enumerate() {
        perm[v] = i;
    }
    let mut p = g.permuted(&perm);
    p.clear_map_numbers();
    p
}

pub fn remove_mapping_shortcut(r: &ReactionRecord) -> Result<ReactionRecord, CoreError> {
    validate_mapping(r)?;
    let union = r.reactant_union();
    let mut plain = union.clone();
    plain.clear_map_numbers();
    let classes = symmetry_classes(&plain, &RankOptions::default());
    let reactant_class: HashMap<u32, u64> = union
        .atoms()
        .iter()
        .enumerate()
        .filter_map(|(v, a)| a.map_num.map(|m| (m, classes[v] as u64)))
        .collect();
    let tiebreak: Vec<u64> =
        r.product.atoms().iter().map(|a| reactant_class[&a.map_num.expect("validated")]).collect();

    let order = canonical_order(&r.product, Some(&tiebreak));
    let mut perm = vec![0; r.product.num_atoms()];
    let mut renumber = HashMap::new();
    for (i, &v) in order.iter().enumerate() {
        perm[v] = i;
        renumber.insert(r.product.atom(v).map_num.expect("validated"), i as u32 + 1);
    }
    let mut product = r.product.permuted(&perm);
    for v in 0..product.num_atoms() {
        product.atom_mut(v).map_num = Some(v as u32 + 1);
    }

    let mut reactants = Vec::with_capacity(r.reactants.len());
    for g in &r.reactants {
        let mut g = g.clone();
        for v in 0..g.num_atoms() {
            let a = g.atom_mut(v);
            a.map_num = a.map_num.map(|m| renumber[&m]);
        }
        reactants.push(write_canonical_smiles(&g));
    }
    reactants.sort();
    let reactants = reactants.iter().map(|s| parse_smiles(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(ReactionRecord { id: r.id.clone(), class: r.class, product, reactants, raw_smiles: r.raw_smiles.clone() })
}
