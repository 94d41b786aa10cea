mod common;

use mars_core::{build_paths, build_vocab, derive, ReactionRecord};
use mars_model::encoder::{Flavor, Pooling};
use mars_model::gradcheck::{check_gradients, relative_error};
use mars_model::{grad_check, plan_path, Grads, Model, ModelConfig, RecordPlan, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-4;

/// Desk records whose product has at most seven heavy atoms.
fn tiny_records(n: usize) -> Vec<ReactionRecord> {
    common::desk().records.iter().filter(|r| r.product.num_atoms() <= 7 && derive(r).is_ok()).take(n).cloned().collect()
}

fn setup(cfg: &ModelConfig, n: usize) -> (Model<f64>, Vec<RecordPlan<f64>>) {
    let records = tiny_records(n);
    let vocab = build_vocab(&records, "tiny").unwrap().vocab;
    let m: Model<f64> = Model::new(cfg, common::desk().elements.clone(), vocab.len()).unwrap();
    let plans = records
        .iter()
        .map(|r| plan_path(&m, &r.id, &r.product, r.class, &build_paths(r, &vocab).unwrap().target, &vocab).unwrap())
        .collect();
    (m, plans)
}

#[test]
fn relative_error_definition() {
    assert_eq!(relative_error(1.0, 1.0), 0.0);
    assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-15);
}

#[test]
fn full_model_gradient_every_flavour() {
    for flavor in [Flavor::Transformer, Flavor::Attention, Flavor::Conv, Flavor::SampleAggregate] {
        let mut cfg = ModelConfig::tiny(8);
        cfg.encoder.flavor = flavor;
        let (m, plans) = setup(&cfg, 1);
        let r = grad_check(&m, &plans[0], EPS).unwrap();
        assert_eq!(r.checked, m.params.num_scalars());
        assert!(r.max_rel_error < TOL, "{flavor:?}: {r:?}");
    }
}

#[test]
fn full_model_gradient_with_dropout_config_and_other_poolings() {
    for pooling in [Pooling::Sum, Pooling::Mean] {
        let mut cfg = ModelConfig::tiny(8);
        cfg.encoder.pooling = pooling;
        cfg.decoder.use_synthon = false;
        let (m, plans) = setup(&cfg, 2);
        let r = grad_check(&m, &plans[1], EPS).unwrap();
        assert!(r.max_rel_error < TOL, "{pooling:?}: {r:?}");
    }
}

#[test]
fn encoder_gradient_on_random_tiny_graphs() {
    let cfg = ModelConfig::tiny(8);
    let m: Model<f64> = Model::new(&cfg, common::desk().elements.clone(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for r in tiny_records(5) {
        let input = m.featurize(&r.product, None).unwrap();
        let n = input.num_objects();
        let w_obj: Vec<f64> = (0..n * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w_graph: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let report = check_gradients(&m.params, EPS, |p, grad| {
            let mut tape = Tape::new(p);
            let enc = m.encoder.forward(&mut tape, &input, true)?;
            let a = tape.mul_const(enc.objects.unwrap(), w_obj.clone());
            let b = tape.mul_const(enc.graph, w_graph.clone());
            let (a, b) = (tape.sum_rows(a), tape.sum_rows(b));
            let s = tape.add(a, b);
            let ones = tape.constant(8, 1, vec![1.0; 8]);
            let loss = tape.matmul(s, ones);
            let g: Option<Grads<f64>> = grad.then(|| tape.backward(loss));
            Ok((tape.scalar(loss), g))
        })
        .unwrap();
        assert!(report.max_rel_error < TOL, "{}: {report:?}", r.id);
    }
}

#[test]
fn eps_sweep_is_smallest_at_the_default_step() {
    let (m, plans) = setup(&ModelConfig::tiny(8), 1);
    let errs: Vec<f64> = [1e-4, 1e-5, 1e-6].iter().map(|&e| grad_check(&m, &plans[0], e).unwrap().max_rel_error).collect();
    eprintln!("eps sweep 1e-4, 1e-5, 1e-6: {errs:?}");
    assert!(errs[0] < TOL);
    assert!(errs[0] <= errs[1] && errs[0] <= errs[2]);
}
