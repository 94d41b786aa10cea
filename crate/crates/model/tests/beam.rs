mod common;

use std::collections::{BTreeMap, BTreeSet};

use mars_chem::parse_smiles;
use mars_core::MotifVocab;
use mars_model::eval::TOP_N;
use mars_model::{beam_search, evaluate_topk, exhaustive_search, greedy_decode, path_log_probs, BeamConfig, Model, ModelConfig};

fn unbounded(max_steps: usize) -> BeamConfig {
    BeamConfig { k: usize::MAX, fan_out: usize::MAX, max_steps: Some(max_steps) }
}

fn vocab(keys: &[&str]) -> MotifVocab {
    let counts: BTreeMap<String, usize> = keys.iter().map(|k| (k.to_string(), 1)).collect();
    MotifVocab::from_counts(&counts, "tiny").unwrap()
}

fn tiny_model(vocab: &MotifVocab, seed: u64) -> Model<f64> {
    let mut cfg = ModelConfig::tiny(8);
    cfg.seed = seed;
    Model::new(&cfg, common::desk().elements.clone(), vocab.len()).unwrap()
}

#[test]
fn beam_scores_equal_teacher_forced_path_scores() {
    let (records, vocab, _) = common::small_set(4);
    let m: Model<f64> = common::tiny_model(8, &vocab);
    for r in &records {
        let preds = beam_search(&m, &vocab, &r.product, r.class, &BeamConfig::default()).unwrap();
        for p in &preds {
            let lp = path_log_probs(&m, &r.product, r.class, &p.tokens, &vocab).unwrap();
            assert_eq!(lp, p.step_log_probs);
            assert!((lp.iter().sum::<f64>() - p.log_prob).abs() < 1e-10);
        }
    }
}

#[test]
fn predictions_are_ranked_and_distinct() {
    let (records, vocab, _) = common::small_set(4);
    let m: Model<f64> = common::tiny_model(8, &vocab);
    for r in &records {
        let preds = beam_search(&m, &vocab, &r.product, r.class, &BeamConfig::default()).unwrap();
        assert!(preds.len() <= 10);
        let keys: BTreeSet<_> = preds.iter().map(|p| p.reactants.clone()).collect();
        assert_eq!(keys.len(), preds.len());
        for (i, p) in preds.iter().enumerate() {
            assert_eq!(p.rank, i + 1);
            assert!(p.log_prob <= 0.0);
        }
        assert!(preds.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
    }
}

#[test]
fn width_one_equals_greedy() {
    let (records, vocab, _) = common::small_set(6);
    let m: Model<f64> = common::tiny_model(8, &vocab);
    let cfg = BeamConfig { k: 1, fan_out: usize::MAX, max_steps: None };
    for r in &records {
        let beam = beam_search(&m, &vocab, &r.product, r.class, &cfg).map(|mut v| v.remove(0));
        let greedy = greedy_decode(&m, &vocab, &r.product, r.class);
        match (beam, greedy) {
            (Ok(b), Ok(g)) => assert_eq!(b, g),
            (Err(b), Err(g)) => assert_eq!(b.kind(), g.kind()),
            (b, g) => panic!("beam {b:?} vs greedy {g:?}"),
        }
    }
}

#[test]
fn unbounded_beam_equals_exhaustive_enumeration() {
    let cases = [
        ("O", vec!["C[OH:1]", "CC(=O)[OH:1]", "[CH3:2][OH:1]", "[CH4:1]"]),
        ("N", vec!["C[NH2:1]", "[CH3:2][NH2:1]", "[CH3:1]Cl"]),
        ("C", vec!["[CH3:1]C", "[CH3:1]O", "[CH3:1]Cl", "[CH3:1][OH:2]", "C[OH:1]"]),
    ];
    for (i, (smiles, keys)) in cases.iter().enumerate() {
        let v = vocab(keys);
        let m = tiny_model(&v, i as u64 + 1);
        let product = parse_smiles(smiles).unwrap();
        let max_steps = 5;
        let oracle = exhaustive_search(&m, &v, &product, None, max_steps).unwrap();
        let beam = beam_search(&m, &v, &product, None, &unbounded(max_steps)).unwrap();
        assert!(oracle.len() > 1, "{smiles}");
        assert_eq!(beam.len(), oracle.len(), "{smiles}");
        for (b, o) in beam.iter().zip(&oracle) {
            assert_eq!(b.reactants, o.reactants, "{smiles}");
            assert!((b.log_prob - o.log_prob).abs() < 1e-10);
        }
    }
}

#[test]
fn no_valid_hypothesis_is_an_error() {
    // A vocabulary whose only motif cannot attach to the product's element.
    let v = vocab(&["C[NH2:1]"]);
    let m = tiny_model(&v, 1);
    let product = parse_smiles("O").unwrap();
    let err = beam_search(&m, &v, &product, None, &unbounded(4)).unwrap_err();
    assert_eq!(err.kind(), "NoValidHypothesis");
    assert_eq!(exhaustive_search(&m, &v, &product, None, 4).unwrap_err().kind(), "NoValidHypothesis");
}

#[test]
fn top_n_accuracy_is_monotone() {
    let (records, vocab, _) = common::small_set(6);
    let m: Model<f32> = common::tiny_model(16, &vocab);
    let mut rows = Vec::new();
    let report = evaluate_topk(&m, &vocab, &records, &BeamConfig::default(), 1, "cfg", |r| rows.push(r)).unwrap();
    let mut parallel = Vec::new();
    let again = evaluate_topk(&m, &vocab, &records, &BeamConfig::default(), 4, "cfg", |r| parallel.push(r)).unwrap();
    assert_eq!(again, report);
    assert_eq!(parallel, rows);
    assert_eq!(report.records, 6);
    let acc: Vec<f64> = TOP_N.iter().map(|n| report.accuracy[n]).collect();
    assert!(acc.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows.iter().all(|r| r.config_hash == "cfg" && r.rank >= 1 && r.rank <= 10));
    for (r, rank) in records.iter().zip(&report.ranks) {
        if let Some(k) = rank {
            let row = rows.iter().find(|x| x.id == r.id && x.rank == *k).unwrap();
            assert_eq!(row.reactants, r.reactant_key().join("."));
        }
    }
}
