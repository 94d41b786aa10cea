#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use mars_chem::MolGraph;
use mars_core::{load_reactions, parse_reaction, remove_mapping_shortcut, LoadReport, ReactionRecord};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn desk_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_corpus.csv"))
}

pub fn desk() -> &'static LoadReport {
    static DESK: OnceLock<LoadReport> = OnceLock::new();
    DESK.get_or_init(|| load_reactions(&desk_path(), None).expect("desk corpus loads"))
}

pub fn desk_canonical() -> &'static Vec<ReactionRecord> {
    static RECORDS: OnceLock<Vec<ReactionRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| desk().records.iter().map(|r| remove_mapping_shortcut(r).expect("valid mapping")).collect())
}

pub fn record(rxn: &str) -> ReactionRecord {
    remove_mapping_shortcut(&parse_reaction("t", None, rxn).expect("parses")).expect("valid mapping")
}

pub fn shuffle_graph(g: &MolGraph, rng: &mut impl Rng) -> MolGraph {
    let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
    perm.shuffle(rng);
    g.permuted(&perm)
}

/// The same reaction with every atom order and the reactant order shuffled.
pub fn shuffled_record(r: &ReactionRecord, rng: &mut impl Rng) -> ReactionRecord {
    let mut reactants: Vec<MolGraph> = r.reactants.iter().map(|g| shuffle_graph(g, rng)).collect();
    reactants.shuffle(rng);
    ReactionRecord { product: shuffle_graph(&r.product, rng), reactants, ..r.clone() }
}
