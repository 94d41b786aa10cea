mod common;

use mars_chem::{parse_smiles, MolGraph};
use mars_model::encoder::{Flavor, GraphInput, Pooling};
use mars_model::nn::Dropout;
use mars_model::tape::{mish, sigmoid};
use mars_model::{Model, ModelConfig, ParamStore, Tape};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mol(s: &str) -> MolGraph {
    parse_smiles(s).expect("valid SMILES")
}

fn model(cfg: &ModelConfig) -> Model<f64> {
    Model::new(cfg, common::desk().elements.clone(), 5).expect("model builds")
}

fn with(flavor: Flavor, pooling: Pooling) -> ModelConfig {
    let mut c = ModelConfig::tiny(8);
    c.encoder.flavor = flavor;
    c.encoder.pooling = pooling;
    c
}

const FLAVORS: [Flavor; 4] = [Flavor::Transformer, Flavor::Attention, Flavor::Conv, Flavor::SampleAggregate];

struct Dense<'a> {
    p: &'a ParamStore<f64>,
}

impl Dense<'_> {
    fn linear(&self, name: &str, x: &[Vec<f64>], bias: bool) -> Vec<Vec<f64>> {
        let w = self.p.get(&format!("{name}.w")).unwrap();
        let b = bias.then(|| self.p.get(&format!("{name}.b")).unwrap());
        x.iter()
            .map(|row| {
                (0..w.cols)
                    .map(|j| {
                        let mut s = b.map_or(0.0, |b| b.data[j]);
                        for (i, &xi) in row.iter().enumerate() {
                            s += xi * w.data[i * w.cols + j];
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(|r| r.to_vec()).collect()
}

/// Transformer layers, attention pooling and object rows written as
/// plain loops over the same parameters.
fn reference(m: &Model<f64>, input: &GraphInput<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let d = m.dim();
    let heads = m.config.encoder.heads;
    let hd = d / heads;
    let dense = Dense { p: &m.params };
    let n = input.num_atoms;
    let mb = input.num_bonds();
    let mut h = dense.linear("enc.atom_in", &rows(&input.atoms, input.atom_width), true);
    let eb = dense.linear("enc.bond_in", &rows(&input.bonds, input.bonds.len() / mb.max(1)), true);
    for l in 0..m.config.encoder.layers {
        let p = |s: &str| format!("enc.layer{l}.{s}");
        let q = dense.linear(&p("q"), &h, true);
        let k = dense.linear(&p("k"), &h, true);
        let v = dense.linear(&p("v"), &h, true);
        let skip = dense.linear(&p("skip"), &h, true);
        let ek = dense.linear(&p("edge"), &eb, false);
        let mut out = skip.clone();
        for t in 0..n {
            // Incoming edges (source, bond).
            let inc: Vec<(usize, usize)> = (0..mb)
                .flat_map(|b| {
                    let (x, y) = (input.begins[b], input.ends[b]);
                    [(x, y, b), (y, x, b)]
                })
                .filter(|&(_, dst, _)| dst == t)
                .map(|(src, _, b)| (src, b))
                .collect();
            if inc.is_empty() {
                continue;
            }
            for hh in 0..heads {
                let r = hh * hd..(hh + 1) * hd;
                let scores: Vec<f64> = inc
                    .iter()
                    .map(|&(s, b)| r.clone().map(|c| q[t][c] * (k[s][c] + ek[b][c])).sum::<f64>() / (hd as f64).sqrt())
                    .collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
                for (j, &(s, _)) in inc.iter().enumerate() {
                    let a = (scores[j] - mx).exp() / z;
                    for c in r.clone() {
                        out[t][c] += a * v[s][c];
                    }
                }
            }
        }
        for t in 0..n {
            for c in 0..d {
                h[t][c] += mish(out[t][c]);
            }
        }
    }
    let gate = dense.linear("enc.gate", &h, true);
    let mx = gate.iter().map(|g| g[0]).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = gate.iter().map(|g| (g[0] - mx).exp()).sum();
    let mut graph = vec![0.0; d];
    for t in 0..n {
        let a = (gate[t][0] - mx).exp() / z;
        for c in 0..d {
            graph[c] += a * h[t][c];
        }
    }
    let pair = |a: usize, b: usize| -> Vec<f64> {
        let x: Vec<f64> = h[a].iter().chain(&h[b]).copied().collect();
        dense.linear("enc.bond_mlp", &[x], true)[0].iter().map(|&y| mish(y)).collect()
    };
    let mut objects = Vec::new();
    for b in 0..mb {
        let (f, r) = (pair(input.begins[b], input.ends[b]), pair(input.ends[b], input.begins[b]));
        objects.push(f.iter().zip(&r).map(|(x, y)| 0.5 * (x + y)).collect());
    }
    for t in 0..n {
        objects.push(pair(t, t));
    }
    (h, objects, graph)
}

#[test]
fn matches_loop_reference_on_four_atoms() {
    let mut m = model(&ModelConfig::tiny(8));
    // Non-zero gate so attention pooling is not plain averaging.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for x in &mut m.params.get_mut("enc.gate.w").unwrap().data {
        *x = rand::Rng::gen_range(&mut rng, -1.0..1.0);
    }
    let input = m.featurize(&mol("CC(=O)N"), None).unwrap();
    assert_eq!(input.num_atoms, 4);
    let e = m.encoder.embed(&m.params, &input).unwrap();
    let (h, objects, graph) = reference(&m, &input);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&e.atom_reps, &h.concat()));
    assert!(close(&e.object_reps, &objects.concat()));
    assert!(close(&e.graph_rep, &graph));
}

#[test]
fn zero_weights_give_half_probability_for_every_object() {
    let mut m = model(&ModelConfig::tiny(8));
    m.params.zero_all();
    let input = m.featurize(&mol("c1ccccc1O"), None).unwrap();
    let mut tape = Tape::new(&m.params);
    let enc = m.encoder.forward(&mut tape, &input, true).unwrap();
    let ctx = m.decoder.object_context(&mut tape, enc.objects.unwrap());
    let hidden = m.decoder.init_hidden(&mut tape, enc.graph, &mut Dropout::off());
    let zero = tape.zeros(1, 8);
    let (_, psi) = m.decoder.step(&mut tape, enc.graph, zero, &hidden);
    let s = m.decoder.target_logits(&mut tape, psi, &ctx, &mut Dropout::off());
    assert_eq!(tape.value(s).len(), input.num_objects());
    assert!(tape.value(s).iter().all(|&z| sigmoid(z) == 0.5));
}

#[test]
fn single_atom_has_one_object_and_no_messages() {
    for flavor in FLAVORS {
        let m = model(&with(flavor, Pooling::Attention));
        let input = m.featurize(&mol("C"), None).unwrap();
        let e = m.encoder.embed(&m.params, &input).unwrap();
        assert_eq!(e.object_reps.len(), 8);
        assert_eq!(e.graph_rep, e.atom_reps);
    }
}

#[test]
fn pooling_closed_forms() {
    let d = 8;
    let row: Vec<f64> = (0..d).map(|i| i as f64 * 0.25 - 1.0).collect();
    let other: Vec<f64> = (0..d).map(|i| 0.5 - i as f64 * 0.1).collect();
    let pooled = |pooling: Pooling, data: Vec<f64>, n: usize| {
        let m = model(&with(Flavor::Transformer, pooling));
        let mut tape = Tape::new(&m.params);
        let h = tape.constant(n, d, data);
        let p = m.encoder.pool(&mut tape, h, n);
        tape.value(p).to_vec()
    };
    let same = [row.clone(), row.clone(), row.clone()].concat();
    for p in [Pooling::Mean, Pooling::Max, Pooling::Attention] {
        let out = pooled(p, same.clone(), 3);
        assert!(out.iter().zip(&row).all(|(a, b)| (a - b).abs() < 1e-12), "{p:?}");
    }
    let two = [row.clone(), other.clone()].concat();
    let mean = pooled(Pooling::Mean, two.clone(), 2);
    let sum = pooled(Pooling::Sum, two.clone(), 2);
    let att = pooled(Pooling::Attention, two.clone(), 2);
    let max = pooled(Pooling::Max, two, 2);
    for c in 0..d {
        assert!((sum[c] - 2.0 * mean[c]).abs() < 1e-12);
        assert!((att[c] - mean[c]).abs() < 1e-12, "zero gate averages");
        assert_eq!(max[c], row[c].max(other[c]));
    }
}

#[test]
fn sigma_g_initializes_every_gru_layer() {
    let m = model(&ModelConfig::tiny(8));
    assert_eq!(m.params.get("dec.sigma_g.w").map(|t| (t.rows, t.cols)), Some((8, 24)));
    let input = m.featurize(&mol("CCO"), None).unwrap();
    let mut tape = Tape::new(&m.params);
    let enc = m.encoder.forward(&mut tape, &input, false).unwrap();
    let hidden = m.decoder.init_hidden(&mut tape, enc.graph, &mut Dropout::off());
    assert_eq!(hidden.len(), 3);
    for h in &hidden {
        assert_eq!(tape.shape(*h), (1, 8));
    }
    assert_ne!(tape.value(hidden[0]), tape.value(hidden[1]));
}

#[test]
fn rejects_wrong_feature_width_and_empty_graphs() {
    let m = model(&ModelConfig::tiny(8));
    let mut input = m.featurize(&mol("CC"), None).unwrap();
    input.atom_width += 1;
    let err = m.encoder.embed(&m.params, &input).unwrap_err();
    assert_eq!(err.kind(), "DimensionMismatch");
    let empty = GraphInput::<f64> { num_atoms: 0, atom_width: m.encoder.atom_width, atoms: vec![], bonds: vec![], begins: vec![], ends: vec![] };
    assert_eq!(m.encoder.embed(&m.params, &empty).unwrap_err().kind(), "EmptyGraph");
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Graph embedding unchanged by atom renumbering; atom rows follow the
/// permutation.
fn check_permutation(m: &Model<f64>, g: &MolGraph, perm: &[usize]) -> f64 {
    let a = m.encoder.embed(&m.params, &m.featurize(g, None).unwrap()).unwrap();
    let pg = g.permuted(perm);
    let b = m.encoder.embed(&m.params, &m.featurize(&pg, None).unwrap()).unwrap();
    let mut worst = max_diff(&a.graph_rep, &b.graph_rep);
    for (old, &new) in perm.iter().enumerate() {
        worst = worst.max(max_diff(a.atom(old), b.atom(new)));
    }
    worst
}

#[test]
fn all_flavours_and_poolings_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for flavor in FLAVORS {
        for pooling in [Pooling::Max, Pooling::Sum, Pooling::Mean, Pooling::Attention] {
            let m = model(&with(flavor, pooling));
            for s in ["CC(=O)Oc1ccccc1C(=O)O", "C1CC1N", "[NH4+].[Cl-]"] {
                let g = mol(s);
                let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
                perm.shuffle(&mut rng);
                assert!(check_permutation(&m, &g, &perm) < 1e-10, "{flavor:?} {pooling:?} {s}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn desk_products_permutation_invariant(i in 0usize..2000, seed in any::<u64>()) {
        let m = model(&ModelConfig::tiny(8));
        let records = &common::desk().records;
        let g = &records[i % records.len()].product;
        let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(check_permutation(&m, g, &perm) < 1e-10);
    }
}
