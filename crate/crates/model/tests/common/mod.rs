#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use mars_chem::ElementSet;
use mars_core::{build_paths, build_vocab, load_reactions, remove_mapping_shortcut, MotifVocab, ReactionRecord, TransformationPath};
use mars_model::{plan_path, Model, ModelConfig, RecordPlan, Scalar};

pub fn desk_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_corpus.csv"))
}

pub struct Desk {
    pub records: Vec<ReactionRecord>,
    pub elements: ElementSet,
}

pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let report = load_reactions(&desk_path(), None).expect("desk corpus loads");
        let records = report.records.iter().map(|r| remove_mapping_shortcut(r).expect("valid mapping")).collect();
        Desk { records, elements: report.elements.clone() }
    })
}

/// The first `n` desk records that yield a path, with a vocabulary built
/// over them.
pub fn small_set(n: usize) -> (Vec<ReactionRecord>, MotifVocab, Vec<TransformationPath>) {
    let mut picked = Vec::new();
    for r in &desk().records {
        if picked.len() == n {
            break;
        }
        if mars_core::derive(r).is_ok() {
            picked.push(r.clone());
        }
    }
    let vocab = build_vocab(&picked, "test").expect("vocab builds").vocab;
    let paths = picked.iter().map(|r| build_paths(r, &vocab).expect("path builds")).collect();
    (picked, vocab, paths)
}

pub fn plans<T: Scalar>(model: &Model<T>, records: &[ReactionRecord], paths: &[TransformationPath], vocab: &MotifVocab) -> Vec<RecordPlan<T>> {
    records
        .iter()
        .zip(paths)
        .map(|(r, p)| plan_path(model, &r.id, &r.product, r.class, &p.target, vocab).expect("plan builds"))
        .collect()
}

pub fn tiny_model<T: Scalar>(dim: usize, vocab: &MotifVocab) -> Model<T> {
    Model::new(&ModelConfig::tiny(dim), desk().elements.clone(), vocab.len()).expect("model builds")
}
