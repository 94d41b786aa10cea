//! Build-and-replay oracle: every built path must reproduce its reactants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::apply_path;
use crate::motif::MotifVocab;
use crate::path::{derive, Derivation};
use crate::record::{canonical_multiset, ReactionRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub id: String,
    pub expected: Vec<String>,
    /// Replayed reactants, or the replay error.
    pub got: Result<Vec<String>, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub total: usize,
    pub built: usize,
    pub replayed: usize,
    /// Build failures by error kind.
    pub rejected: BTreeMap<String, usize>,
    pub mismatches: Vec<Mismatch>,
    pub vocab_size: usize,
}

impl RoundTripReport {
    pub fn build_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.built as f64 / self.total as f64
        }
    }

    pub fn replay_rate(&self) -> f64 {
        if self.built == 0 {
            0.0
        } else {
            self.replayed as f64 / self.built as f64
        }
    }
}

/// Derives every record, builds a vocabulary from the derivations unless
/// one is given, then replays each built path.
pub fn round_trip(records: &[ReactionRecord], vocab: Option<&MotifVocab>) -> RoundTripReport {
    let mut report = RoundTripReport { total: records.len(), ..Default::default() };
    let mut derived: Vec<(&ReactionRecord, Derivation)> = Vec::new();
    for r in records {
        match derive(r) {
            Ok(d) => derived.push((r, d)),
            Err(e) => *report.rejected.entry(e.kind().to_string()).or_default() += 1,
        }
    }
    let owned;
    let vocab = match vocab {
        Some(v) => v,
        None => {
            let mut counts = BTreeMap::new();
            for (_, d) in &derived {
                let mut keys = Vec::new();
                for m in &d.motifs {
                    m.keys(&mut keys);
                }
                for k in keys {
                    *counts.entry(k.to_string()).or_insert(0usize) += 1;
                }
            }
            owned = MotifVocab::from_counts(&counts, "").expect("keys come from canonical SMILES");
            &owned
        }
    };
    report.vocab_size = vocab.len();
    for (r, d) in derived {
        let path = match d.path(&r.id, vocab) {
            Ok(p) => p,
            Err(e) => {
                *report.rejected.entry(e.kind().to_string()).or_default() += 1;
                continue;
            }
        };
        report.built += 1;
        let expected = r.reactant_key();
        let got = apply_path(&r.product, &path.target, vocab).map(|g| canonical_multiset(&g));
        match got {
            Ok(g) if g == expected => report.replayed += 1,
            other => report.mismatches.push(Mismatch {
                id: r.id.clone(),
                expected,
                got: other.map_err(|e| e.to_string()),
            }),
        }
    }
    report
}
