use std::collections::BTreeSet;

use mars_chem::{
    canonicalize, parse_smiles, parse_smiles_raw, write_canonical_smiles, write_canonical_smiles_with, BondOrder,
    ChemError, Element, MolGraph, WriteOptions,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn corpus_molecules() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_corpus.csv");
    let text = std::fs::read_to_string(path).expect("desk corpus present");
    let mut set = BTreeSet::new();
    for line in text.lines().skip(1) {
        let rxn = line.splitn(3, ',').nth(2).unwrap_or("");
        for side in rxn.split('>') {
            for mol in side.split('.').filter(|m| !m.is_empty()) {
                set.insert(mol.to_string());
            }
        }
    }
    set.into_iter().collect()
}

fn stripped(g: &MolGraph) -> String {
    write_canonical_smiles_with(g, WriteOptions { strip_maps: true })
}

#[test]
fn ethane() {
    let g = parse_smiles("CC").unwrap();
    assert_eq!(g.num_atoms(), 2);
    assert_eq!(g.num_bonds(), 1);
    assert_eq!(g.bond(0).order, BondOrder::Single);
    assert!(g.atoms().iter().all(|a| a.hydrogens == 3));
}

#[test]
fn benzene() {
    let g = parse_smiles("c1ccccc1").unwrap();
    assert_eq!(g.num_atoms(), 6);
    assert!(g.atoms().iter().all(|a| a.aromatic && a.hydrogens == 1));
    assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    assert_eq!(g.rings().len(), 1);
}

#[test]
fn kekule_benzene_is_perceived_aromatic() {
    assert_eq!(canonicalize("C1=CC=CC=C1").unwrap(), "c1ccccc1");
}

#[test]
fn trimethylsilyl_acetate() {
    let g = parse_smiles("CC(=O)O[Si](C)(C)C").unwrap();
    assert_eq!(g.num_atoms(), 8);
    let si = Element::from_symbol("Si").unwrap();
    assert_eq!(g.atoms().iter().filter(|a| a.element == si).count(), 1);
    let carbonyls = g
        .bonds()
        .iter()
        .filter(|b| {
            b.order == BondOrder::Double
                && [g.atom(b.begin).element, g.atom(b.end).element].contains(&Element::O)
                && [g.atom(b.begin).element, g.atom(b.end).element].contains(&Element::C)
        })
        .count();
    assert_eq!(carbonyls, 1);
}

#[test]
fn relabeling_gives_same_string() {
    assert_eq!(canonicalize("OCC").unwrap(), canonicalize("CCO").unwrap());
    assert_eq!(canonicalize("C").unwrap(), "C");
}

#[test]
fn syntax_errors() {
    for bad in ["", "C(", "C)", "C1CC", "C==C", "C%1C", "[C", "C.", "(C)"] {
        assert!(matches!(parse_smiles(bad), Err(ChemError::Syntax { .. })), "{bad:?}");
    }
}

#[test]
fn unsupported_elements() {
    for bad in ["[Xe]", "C[U]", "*C", "[*]C"] {
        assert!(matches!(parse_smiles(bad), Err(ChemError::UnsupportedElement(_))), "{bad:?}");
    }
}

#[test]
fn valence_errors() {
    assert!(matches!(parse_smiles("C(C)(C)(C)(C)C"), Err(ChemError::Valence { .. })));
    assert!(matches!(parse_smiles("[CH4]C"), Err(ChemError::Valence { .. })));
    assert!(matches!(parse_smiles("c1cccc1"), Err(ChemError::Kekulize { .. })));
}

#[test]
fn brackets_and_maps() {
    let g = parse_smiles("[NH4+].[O-:7]C(=O)C").unwrap();
    assert_eq!(g.atom(0).formal_charge, 1);
    assert_eq!(g.atom(0).hydrogens, 4);
    assert_eq!(g.atom(1).map_num, Some(7));
    assert_eq!(parse_smiles("[13CH4]").unwrap().atom(0).hydrogens, 4);
    assert_eq!(parse_smiles("[CH3:0]O").unwrap().atom(0).map_num, None);
}

#[test]
fn explicit_hydrogens_fold() {
    let g = parse_smiles("[H]C([H])([H])O").unwrap();
    assert_eq!(g.num_atoms(), 2);
    assert_eq!(g.atom(0).hydrogens, 3);
    assert_eq!(canonicalize("[H][H]").unwrap(), "[H][H]");
}

#[test]
fn heteroaromatics_match_kekule_forms() {
    for (aromatic, kekule) in [
        ("c1cc[nH]c1", "C1=CNC=C1"),
        ("O=c1cccc[nH]1", "O=C1C=CC=CN1"),
        ("c1ccc2[nH]ccc2c1", "C1=CC=C2NC=CC2=C1"),
        ("Cn1ccnc1", "CN1C=CN=C1"),
        ("c1ccoc1", "C1=COC=C1"),
        ("C[n+]1ccccc1", "C[N+]1=CC=CC=C1"),
    ] {
        let a = canonicalize(aromatic).unwrap();
        assert_eq!(a, canonicalize(kekule).unwrap(), "{aromatic}");
        assert!(a.contains('c'), "{a} should be aromatic");
    }
}

#[test]
fn percent_ring_closures() {
    assert_eq!(canonicalize("C%12CCCCC%12").unwrap(), canonicalize("C1CCCCC1").unwrap());
}

#[test]
fn double_bond_stereo_is_parsed() {
    use mars_chem::BondStereo;
    let e = parse_smiles("F/C=C/F").unwrap();
    let z = parse_smiles("F/C=C\\F").unwrap();
    assert_eq!(e.bond(1).stereo, BondStereo::E);
    assert_eq!(z.bond(1).stereo, BondStereo::Z);
    let chiral = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
    assert_eq!(chiral.atom(1).chiral, mars_chem::ChiralTag::Clockwise);
}

#[test]
fn twenty_atom_permutations() {
    let g = parse_smiles("CC(C)Cc1ccc(cc1)C(C)C(=O)OCC(=O)N1CCOCC1").unwrap();
    assert!(g.num_atoms() >= 20);
    let reference = write_canonical_smiles(&g);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
    let mut outputs = BTreeSet::new();
    for _ in 0..100 {
        let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
        perm.shuffle(&mut rng);
        outputs.insert(write_canonical_smiles(&g.permuted(&perm)));
    }
    assert_eq!(outputs.len(), 1);
    assert!(outputs.contains(&reference));
}

#[test]
fn corpus_idempotence_and_permutation_invariance() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut parsed = 0;
    for smi in corpus_molecules() {
        let Ok(g) = parse_smiles(&smi) else { continue };
        parsed += 1;
        let once = stripped(&g);
        let twice = stripped(&parse_smiles(&once).unwrap());
        assert_eq!(once, twice, "idempotence for {smi}");
        let mapped = write_canonical_smiles(&g);
        assert_eq!(mapped, write_canonical_smiles(&parse_smiles(&mapped).unwrap()), "mapped {smi}");
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
            perm.shuffle(&mut rng);
            let p = g.permuted(&perm);
            assert_eq!(stripped(&p), once, "permutation of {smi}");
            assert_eq!(write_canonical_smiles(&p), mapped, "mapped permutation of {smi}");
        }
    }
    assert!(parsed > 7000);
}

#[test]
fn implicit_hydrogens_never_negative_and_valences_hold() {
    for smi in corpus_molecules() {
        let Ok(g) = parse_smiles(&smi) else { continue };
        for (v, a) in g.atoms().iter().enumerate() {
            if a.element.is_metal() {
                continue;
            }
            let bonds: u32 = g
                .neighbors(v)
                .iter()
                .map(|&(_, b)| g.bond(b).order.integer().unwrap_or(1))
                .sum();
            let aromatic_bonds = g.neighbors(v).iter().filter(|&&(_, b)| g.bond(b).order == BondOrder::Aromatic).count();
            let allowed = a.element.allowed_valences(a.formal_charge);
            let total = bonds + a.hydrogens as u32;
            let ok = allowed.iter().any(|&x| x as u32 == total || aromatic_bonds > 0 && x as u32 == total + 1);
            assert!(ok, "{smi}: atom {v}");
        }
    }
}

#[test]
fn raw_parse_keeps_aromatic_orders() {
    let g = parse_smiles_raw("c1ccccc1").unwrap();
    assert!(g.rings().is_empty());
    assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
}

fn random_chain(rng: &mut impl Rng) -> String {
    let atoms = ["C", "N", "O", "c1ccccc1", "C(=O)", "Cl", "C1CC1", "S(=O)(=O)", "C#N"];
    let len = rng.gen_range(1..8);
    let mut s = String::new();
    for i in 0..len {
        let a = atoms[rng.gen_range(0..atoms.len())];
        if i > 0 && (a == "Cl" || a == "C#N" || s.ends_with("Cl") || s.ends_with("C#N")) {
            continue;
        }
        s.push_str(a);
    }
    s
}

proptest! {
    #[test]
    fn canonical_form_is_a_fixed_point(seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let smi = random_chain(&mut rng);
        if let Ok(g) = parse_smiles(&smi) {
            let once = write_canonical_smiles(&g);
            let again = write_canonical_smiles(&parse_smiles(&once).unwrap());
            prop_assert_eq!(&once, &again);
            let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
            perm.shuffle(&mut rng);
            prop_assert_eq!(write_canonical_smiles(&g.permuted(&perm)), once);
        }
    }
}
