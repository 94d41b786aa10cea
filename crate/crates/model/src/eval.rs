//! Top-n exact-match evaluation.

use std::collections::BTreeMap;

use mars_core::{MotifVocab, ReactionRecord};
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search, BeamConfig, Prediction};
use crate::error::ModelError;
use crate::model::Model;
use crate::Scalar;

pub const TOP_N: [usize; 4] = [1, 3, 5, 10];

/// One ranked prediction, as written to prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub rank: usize,
    pub reactants: String,
    pub log_prob: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkReport {
    pub records: usize,
    /// Fraction of records whose ground truth appears within the first n
    /// predictions, keyed by n.
    pub accuracy: BTreeMap<usize, f64>,
    /// Rank of the ground truth per record, if found.
    pub ranks: Vec<Option<usize>>,
    /// Records for which decoding produced nothing.
    pub failures: usize,
    pub config_hash: String,
}

impl TopkReport {
    pub fn top(&self, n: usize) -> f64 {
        let hits = self.ranks.iter().filter(|r| matches!(r, Some(r) if *r <= n)).count();
        hits as f64 / self.records.max(1) as f64
    }
}

fn decode_all<T: Scalar>(
    model: &Model<T>,
    vocab: &MotifVocab,
    records: &[ReactionRecord],
    cfg: &BeamConfig,
) -> Vec<Result<Vec<Prediction>, ModelError>> {
    records.iter().map(|r| beam_search(model, vocab, &r.product, r.class, cfg)).collect()
}

/// Decodes every record with beam width `cfg.k` and scores exact matches
/// of the canonical reactant multiset. Records are split into contiguous
/// chunks over `workers` threads; output order is record order.
pub fn evaluate_topk<T: Scalar>(
    model: &Model<T>,
    vocab: &MotifVocab,
    records: &[ReactionRecord],
    cfg: &BeamConfig,
    workers: usize,
    config_hash: &str,
    mut sink: impl FnMut(PredictionRow),
) -> Result<TopkReport, ModelError> {
    let workers = workers.clamp(1, records.len().max(1));
    let decoded: Vec<Result<Vec<Prediction>, ModelError>> = if workers == 1 {
        decode_all(model, vocab, records, cfg)
    } else {
        let chunk = records.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = records.chunks(chunk).map(|part| s.spawn(move || decode_all(model, vocab, part, cfg))).collect();
            handles.into_iter().flat_map(|h| h.join().expect("decoder thread panicked")).collect()
        })
    };
    let mut ranks = Vec::with_capacity(records.len());
    let mut failures = 0;
    for (r, preds) in records.iter().zip(decoded) {
        let truth = r.reactant_key();
        let preds = match preds {
            Ok(p) => p,
            Err(ModelError::NoValidHypothesis) => {
                failures += 1;
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        for p in &preds {
            sink(PredictionRow {
                id: r.id.clone(),
                rank: p.rank,
                reactants: p.smiles(),
                log_prob: p.log_prob,
                config_hash: config_hash.to_string(),
            });
        }
        ranks.push(preds.iter().find(|p| p.reactants == truth).map(|p| p.rank));
    }
    let mut report = TopkReport {
        records: records.len(),
        accuracy: BTreeMap::new(),
        ranks,
        failures,
        config_hash: config_hash.to_string(),
    };
    for n in TOP_N {
        report.accuracy.insert(n, report.top(n));
    }
    Ok(report)
}
