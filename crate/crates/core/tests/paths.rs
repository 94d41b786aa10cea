mod common;

use std::collections::BTreeMap;

use common::{desk_canonical, record, shuffled_record};
use mars_chem::{BondType, Element, ObjectKind};
use mars_core::fuzz::{illegal_variants, random_legal_stream, replay};
use mars_core::path::{read_paths, write_paths};
use mars_core::record::canonical_multiset;
use mars_core::tree::TreeNode;
use mars_core::{
    apply_path, build_paths, build_vocab, compute_edits, derive, linearize, remove_mapping_shortcut, round_trip,
    CoreError, EditState, GraphState, JunctionTree, MotifVocab, Phase, ReactionRecord, Token,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SILYL_ESTER: &str = "[CH3:1][C:2](=[O:3])Cl.[OH:4][Si:5]([CH3:6])([CH3:7])[CH3:8]>>\
                           [CH3:1][C:2](=[O:3])[O:4][Si:5]([CH3:6])([CH3:7])[CH3:8]";
const SILYL_ESTER_FROM_ACID: &str = "[CH3:1][C:2](=[O:3])[OH:4].Cl[Si:5]([CH3:6])([CH3:7])[CH3:8]>>\
                                     [CH3:1][C:2](=[O:3])[O:4][Si:5]([CH3:6])([CH3:7])[CH3:8]";
const TOSYLATE_METHYLATION: &str = "[OH:1][c:2]1[cH:3][cH:4][cH:5][cH:6][cH:7]1.[CH3:8]OS(=O)(=O)c1ccc(C)cc1>>\
                                    [CH3:8][O:1][c:2]1[cH:3][cH:4][cH:5][cH:6][cH:7]1";
const BIPHENYL_ESTER: &str = "[CH3:1][C:2](=[O:3])[O:4]Cc1ccc(-c2ccccc2)cc1>>[CH3:1][C:2](=[O:3])[OH:4]";

fn vocab_for(records: &[ReactionRecord]) -> MotifVocab {
    build_vocab(records, "test").unwrap().vocab
}

fn element_of(r: &ReactionRecord, v: usize) -> Element {
    r.product.atom(v).element
}

#[test]
fn ester_disconnection_removes_one_bond() {
    let r = record(SILYL_ESTER);
    let es = compute_edits(&r).unwrap();
    assert_eq!(es.edits.len(), 1);
    let e = es.edits[0];
    assert_eq!(e.state, EditState::Bond(BondType::None));
    let (kind, b) = r.product.resolve_object(e.object).unwrap();
    assert_eq!(kind, ObjectKind::Bond);
    let bond = r.product.bond(b);
    let mut ends = [element_of(&r, bond.begin), element_of(&r, bond.end)];
    ends.sort();
    assert_eq!(ends, [Element::C, Element::O]);
    assert_eq!(es.attachments, {
        let mut a = vec![bond.begin, bond.end];
        a.sort();
        a
    });
}

#[test]
fn ester_motifs_are_chloride_and_bare_oxygen() {
    let r = record(SILYL_ESTER);
    let d = derive(&r).unwrap();
    let vocab = vocab_for(std::slice::from_ref(&r));
    for (a, node) in d.attachments.iter().zip(&d.motifs) {
        let m = &vocab.motifs[vocab.id(&node.key).unwrap()];
        let q = m.interfaces[node.interface];
        assert_eq!(m.graph.atom(q).element, element_of(&r, *a));
        match element_of(&r, *a) {
            Element::C => {
                assert_eq!(m.graph.num_atoms(), 2);
                assert!(m.graph.atoms().iter().any(|x| x.element == Element::CL));
            }
            Element::O => assert_eq!(m.graph.num_atoms(), 1, "hydrogen-only motif"),
            other => panic!("unexpected attachment element {other:?}"),
        }
    }
    let path = build_paths(&r, &vocab).unwrap();
    let replayed = apply_path(&r.product, &path.target, &vocab).unwrap();
    assert_eq!(canonical_multiset(&replayed), r.reactant_key());
}

#[test]
fn silyl_chloride_mapping_puts_chlorine_on_silicon() {
    let r = record(SILYL_ESTER_FROM_ACID);
    let d = derive(&r).unwrap();
    let vocab = vocab_for(std::slice::from_ref(&r));
    let si = d.attachments.iter().position(|&a| element_of(&r, a) == Element::from_symbol("Si").unwrap()).unwrap();
    let m = &vocab.motifs[vocab.id(&d.motifs[si].key).unwrap()];
    assert_eq!(m.graph.num_atoms(), 2);
    let path = build_paths(&r, &vocab).unwrap();
    assert_eq!(canonical_multiset(&apply_path(&r.product, &path.target, &vocab).unwrap()), r.reactant_key());
}

#[test]
fn tosylate_path_has_a_motif_created_attachment() {
    let r = record(TOSYLATE_METHYLATION);
    let vocab = vocab_for(std::slice::from_ref(&r));
    let path = build_paths(&r, &vocab).unwrap();
    assert_eq!(path.target.len(), 5);
    assert_eq!(path.input.len(), path.target.len());
    assert_eq!(path.input[0], Token::Start);
    assert!(matches!(path.target[0], Token::Edit(_)));
    assert_eq!(path.target[1], Token::FinishEdit);
    assert_eq!(path.input[2], Token::FinishEdit);
    let created: Vec<usize> = path.target[2..]
        .iter()
        .filter_map(|t| match t {
            Token::AddingMotif { attachment, .. } if *attachment >= r.product.num_atoms() => Some(*attachment),
            _ => None,
        })
        .collect();
    assert_eq!(created.len(), 1);
    let two_interface = vocab.motifs.iter().filter(|m| m.num_interfaces() == 2).count();
    assert_eq!(two_interface, 1);
    assert_eq!(canonical_multiset(&apply_path(&r.product, &path.target, &vocab).unwrap()), r.reactant_key());
}

#[test]
fn biphenyl_leaving_group_splits_into_ring_motifs() {
    let r = record(BIPHENYL_ESTER);
    let d = derive(&r).unwrap();
    assert_eq!(d.motifs.len(), 1);
    let root = &d.motifs[0];
    assert_eq!(root.children.len(), 1);
    let phenylene = &root.children[0].1;
    assert_eq!(phenylene.children.len(), 1);
    let phenyl = &phenylene.children[0].1;
    assert!(phenyl.children.is_empty());
    let vocab = vocab_for(std::slice::from_ref(&r));
    for key in [&phenylene.key, &phenyl.key] {
        let m = &vocab.motifs[vocab.id(key).unwrap()];
        assert_eq!(m.graph.num_atoms(), 7, "{key}: ring plus the copied junction atom");
        assert_eq!(m.graph.atoms().iter().filter(|a| a.aromatic).count(), 6, "{key}");
        assert_eq!(m.graph.rings().len(), 1, "{key}");
    }
    let path = build_paths(&r, &vocab).unwrap();
    assert_eq!(canonical_multiset(&apply_path(&r.product, &path.target, &vocab).unwrap()), r.reactant_key());
}

#[test]
fn identity_reaction_has_no_edit() {
    let r = record("[CH3:1][OH:2]>>[CH3:1][OH:2]");
    assert!(matches!(compute_edits(&r), Err(CoreError::NoEditFound)));
}

#[test]
fn merge_requires_matching_element() {
    let r = record(SILYL_ESTER);
    let vocab = vocab_for(std::slice::from_ref(&r));
    let path = build_paths(&r, &vocab).unwrap();
    let finish = path.target.iter().position(|t| *t == Token::FinishEdit).unwrap();
    let mut target = path.target.clone();
    let (Token::AddingMotif { attachment: a0, motif: z0, .. }, Token::AddingMotif { motif: z1, interface: q1, .. }) =
        (target[finish + 1], target[finish + 2])
    else {
        panic!("two motifs expected");
    };
    assert_ne!(z0, z1);
    target[finish + 1] = Token::AddingMotif { attachment: a0, motif: z1, interface: q1 };
    assert!(matches!(apply_path(&r.product, &target, &vocab), Err(CoreError::ElementMismatch(_))));
}

#[test]
fn finish_without_edits_is_rejected() {
    let r = record(SILYL_ESTER);
    let vocab = vocab_for(std::slice::from_ref(&r));
    assert!(matches!(apply_path(&r.product, &[Token::FinishEdit], &vocab), Err(CoreError::GrammarViolation(_))));
    assert!(matches!(apply_path(&r.product, &[], &vocab), Err(CoreError::IncompletePath)));
}

#[test]
fn vocab_counts_shared_motifs() {
    assert!(build_vocab(&[], "").unwrap().vocab.is_empty());
    let a = record(SILYL_ESTER);
    let b = record("[CH3:1][CH2:2][C:3](=[O:4])Cl.[OH:5][CH3:6]>>[CH3:1][CH2:2][C:3](=[O:4])[O:5][CH3:6]");
    let vocab = vocab_for(&[a.clone(), b]);
    let chloride = derive(&a).unwrap().motifs.into_iter().find(|m| m.key.contains("Cl")).unwrap();
    let id = vocab.id(&chloride.key).unwrap();
    assert_eq!(vocab.entries[id].frequency, 2);
    assert_eq!(id, 0, "most frequent first");
}

#[test]
fn linearize_orders_root_attachments() {
    let r = record(SILYL_ESTER);
    let vocab = vocab_for(std::slice::from_ref(&r));
    let empty = JunctionTree { num_product_atoms: 8, roots: vec![] };
    assert!(linearize(&empty, &vocab).unwrap().is_empty());
    let leaf = |motif| TreeNode { motif, interface: 0, children: vec![] };
    let tree = JunctionTree { num_product_atoms: 8, roots: vec![(2, leaf(0)), (5, leaf(1))] };
    let swapped = JunctionTree { num_product_atoms: 8, roots: vec![(2, leaf(1)), (5, leaf(0))] };
    let motifs = |t: &JunctionTree| -> Vec<(usize, usize)> {
        linearize(t, &vocab)
            .unwrap()
            .into_iter()
            .map(|t| match t {
                Token::AddingMotif { attachment, motif, .. } => (attachment, motif),
                _ => unreachable!(),
            })
            .collect()
    };
    assert_eq!(motifs(&tree), vec![(2, 0), (5, 1)]);
    assert_eq!(motifs(&swapped), vec![(2, 1), (5, 0)]);
}

#[test]
fn replay_is_deterministic() {
    let r = record(TOSYLATE_METHYLATION);
    let vocab = vocab_for(std::slice::from_ref(&r));
    let path = build_paths(&r, &vocab).unwrap();
    for k in 0..=path.input.len() {
        let mut a = GraphState::new(&r.product);
        let mut b = GraphState::new(&r.product);
        for t in &path.input[..k] {
            a = a.apply(t, &vocab).unwrap();
        }
        for t in &path.input[..k] {
            b.apply_mut(t, &vocab).unwrap();
        }
        assert_eq!(a, b);
    }
}

#[test]
fn desk_corpus_round_trip() {
    let report = round_trip(desk_canonical(), None);
    assert_eq!(report.replayed, report.built, "mismatches: {:?}", &report.mismatches[..report.mismatches.len().min(3)]);
    assert!(report.build_rate() >= 0.95, "{report:?}");
    assert_eq!(report.vocab_size, 24);
    let expected: BTreeMap<String, usize> = [("BondAddition".to_string(), 81), ("CycleDetected".to_string(), 3)].into();
    assert_eq!(report.rejected, expected);
}

#[test]
fn paths_ignore_input_atom_order() {
    let records = desk_canonical();
    let vocab = vocab_for(records);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for r in records.iter().step_by(7) {
        let Ok(expected) = build_paths(r, &vocab) else { continue };
        let again = remove_mapping_shortcut(&shuffled_record(r, &mut rng)).unwrap();
        assert_eq!(build_paths(&again, &vocab).unwrap(), expected, "{}", r.id);
    }
}

#[test]
fn vocab_and_paths_files_round_trip() {
    let records = &desk_canonical()[..300];
    let vocab = vocab_for(records);
    let dir = tempfile::tempdir().unwrap();
    vocab.save(&dir.path().join("vocab.jsonl")).unwrap();
    let back = MotifVocab::load(&dir.path().join("vocab.jsonl")).unwrap();
    assert_eq!(back.entries, vocab.entries);
    assert_eq!(back.corpus_hash, "test");
    for m in &back.motifs {
        assert!(m.graph.is_connected() && !m.interfaces.is_empty());
    }
    let paths: Vec<_> = records.iter().filter_map(|r| build_paths(r, &vocab).ok()).collect();
    write_paths(&dir.path().join("paths.jsonl"), &paths, &vocab).unwrap();
    assert_eq!(read_paths(&dir.path().join("paths.jsonl"), &vocab).unwrap(), paths);
    let other = vocab_for(&records[..20]);
    assert!(read_paths(&dir.path().join("paths.jsonl"), &other).is_err());
}

#[test]
fn built_paths_satisfy_the_grammar() {
    let records = desk_canonical();
    let vocab = vocab_for(records);
    for r in records {
        let Ok(p) = build_paths(r, &vocab) else { continue };
        let finish = p.target.iter().position(|t| *t == Token::FinishEdit).unwrap();
        assert!(finish >= 1);
        assert!(p.target[..finish].iter().all(|t| matches!(t, Token::Edit(_))));
        assert!(p.target[finish + 1..].iter().all(|t| matches!(t, Token::AddingMotif { .. })));
        let mut objects: Vec<usize> =
            p.target[..finish].iter().map(|t| if let Token::Edit(e) = t { e.object } else { 0 }).collect();
        let sorted = objects.clone();
        objects.dedup();
        assert_eq!(objects, sorted, "edits ascending and unique");
        let state = replay(&r.product, &p.input.iter().chain(p.target.last()).copied().collect::<Vec<_>>(), &vocab);
        assert_eq!(state.unwrap().phase(), Phase::Done);
    }
}

#[test]
fn random_streams_respect_the_grammar() {
    let records = desk_canonical();
    let vocab = vocab_for(records);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut legal = 0;
    for r in records.iter().step_by(13).take(150) {
        let Some(stream) = random_legal_stream(&r.product, &vocab, &mut rng, 3, 24) else { continue };
        legal += 1;
        replay(&r.product, &stream, &vocab).unwrap();
        for (name, bad) in illegal_variants(&stream, &r.product, &vocab) {
            assert!(replay(&r.product, &bad, &vocab).is_err(), "{name} accepted on {}", r.id);
        }
    }
    assert!(legal > 100, "{legal}");
}
