//! Canonical atom ranking by iterative neighbourhood refinement.

use crate::graph::MolGraph;

#[derive(Debug, Clone, Default)]
pub struct RankOptions<'a> {
    /// Include atom-map numbers in the atom invariants.
    pub use_maps: bool,
    /// Extra per-atom invariant, compared after the built-in ones.
    pub extra: Option<&'a [u64]>,
    /// Key used to pick which atom of a tied class is split off first;
    /// falls back to the atom index.
    pub tiebreak: Option<&'a [u64]>,
}

/// Dense ranks of `keys`: equal keys share a rank, ranks count distinct
/// smaller keys.
fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for i in 0..idx.len() {
        if i > 0 && keys[idx[i]] != keys[idx[i - 1]] {
            r += 1;
        }
        ranks[idx[i]] = r;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.num_atoms())
            .map(|v| {
                let mut nb: Vec<(usize, u8)> =
                    g.neighbors(v).iter().map(|&(u, b)| (ranks[u], g.bond(b).order.code())).collect();
                nb.sort_unstable();
                (ranks[v], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        if next_classes == classes {
            return next;
        }
        classes = next_classes;
        ranks = next;
    }
}

fn initial_ranks(g: &MolGraph, opts: &RankOptions) -> Vec<usize> {
    let invariants: Vec<_> = (0..g.num_atoms())
        .map(|v| {
            let a = g.atom(v);
            (
                a.element.atomic_number(),
                a.formal_charge,
                g.degree(v),
                a.hydrogens,
                a.aromatic,
                g.neighbors(v).iter().any(|&(_, b)| g.bond(b).in_ring),
                if opts.use_maps { a.map_num } else { None },
                opts.extra.map_or(0, |e| e[v]),
            )
        })
        .collect();
    dense_ranks(&invariants)
}

/// Refined invariant classes without tie splitting. Atoms in different
/// classes are never symmetry equivalent.
pub fn symmetry_classes(g: &MolGraph, opts: &RankOptions) -> Vec<usize> {
    refine(g, initial_ranks(g, opts))
}

/// Canonical ranks `0..n`, one per atom, independent of input atom order up
/// to automorphism.
pub fn canonical_ranks(g: &MolGraph, opts: &RankOptions) -> Vec<usize> {
    let n = g.num_atoms();
    let mut ranks = symmetry_classes(g, opts);
    while class_count(&ranks) < n {
        let mut size = vec![0usize; n];
        for &r in &ranks {
            size[r] += 1;
        }
        let tied = (0..n).find(|&r| size[r] > 1).expect("fewer classes than atoms");
        let chosen = (0..n)
            .filter(|&v| ranks[v] == tied)
            .min_by_key(|&v| (opts.tiebreak.map_or(0, |t| t[v]), v))
            .expect("class is nonempty");
        let keys: Vec<(usize, bool)> = (0..n).map(|v| (ranks[v], v != chosen)).collect();
        ranks = refine(g, dense_ranks(&keys));
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn ranks_are_a_permutation() {
        let g = parse_smiles("CC(C)(C)c1ccc(O)cc1").unwrap();
        let mut r = canonical_ranks(&g, &RankOptions::default());
        r.sort_unstable();
        assert_eq!(r, (0..g.num_atoms()).collect::<Vec<_>>());
    }

    #[test]
    fn maps_split_symmetric_atoms() {
        let g = parse_smiles("[CH3:2]C[CH3:1]").unwrap();
        let with = canonical_ranks(&g, &RankOptions { use_maps: true, ..Default::default() });
        assert!(with[2] < with[0]);
    }
}
