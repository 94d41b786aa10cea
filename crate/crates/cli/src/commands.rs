//! One function per subcommand. Each returns a serializable report and
//! writes its artifacts under the run's output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mars_chem::{canonicalize, parse_smiles, ElementSet};
use mars_core::jsonl::{read_jsonl, sha256_hex, write_jsonl, Header};
use mars_core::motif::{VOCAB_FORMAT, VOCAB_VERSION};
use mars_core::path::{PATHS_FORMAT, PATHS_VERSION};
use mars_core::record::{RECORD_FORMAT, RECORD_VERSION};
use mars_core::roundtrip::Mismatch;
use mars_core::split::shipped_split;
use mars_core::{
    build_paths, build_vocab, canonical_product, load_reactions, read_record_store, remove_mapping_shortcut, round_trip,
    split_dataset, DatasetSplit, MotifVocab, ReactionRecord, TransformationPath,
};
use mars_model::eval::{PredictionRow, TOP_N};
use mars_model::trainer::{TrainOptions, Trainer};
use mars_model::{beam_search, evaluate_topk, load_checkpoint, plan_path, Model, ModelError};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SplitName};
use crate::error::CliError;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const VOCAB_FILE: &str = "vocab.jsonl";
pub const PATHS_FILE: &str = "paths.jsonl";
pub const BUILD_REPORT: &str = "build_report.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const TRAIN_LOG: &str = "train.jsonl";
pub const ROUNDTRIP_REPORT: &str = "roundtrip_report.json";

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn file_hash(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub split: DatasetSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub config_hash: String,
    pub input_hash: String,
    pub rows: usize,
    pub accepted: usize,
    /// Rejected rows by error kind.
    pub rejected: BTreeMap<String, usize>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub shipped_split: bool,
}

/// Loads a mapped reaction file, removes the mapping shortcut, splits and
/// writes the record store.
pub fn ingest(cfg: &RunConfig) -> Result<IngestReport, CliError> {
    let input = cfg.data.input.clone().ok_or_else(|| CliError::Usage("no input file (data.input or --input)".into()))?;
    let loaded = load_reactions(&input, None)?;
    let mut rejected = loaded.rejected.clone();
    let mut records = Vec::with_capacity(loaded.records.len());
    for r in &loaded.records {
        match remove_mapping_shortcut(r) {
            Ok(r) => records.push(r),
            Err(e) => *rejected.entry(e.kind().to_string()).or_default() += 1,
        }
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no usable reactions", input.display())));
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let shipped = cfg.data.shipped_split && !loaded.shipped_split.is_empty();
    let split = if shipped { shipped_split(&ids, &loaded.shipped_split) } else { split_dataset(&ids, cfg.data.split_seed) };

    let hash = cfg.hash();
    fs::create_dir_all(&cfg.data.out_dir)?;
    let header = Header::new(RECORD_FORMAT, RECORD_VERSION).with("elements", &loaded.elements).with("config_hash", &hash);
    let rows: Vec<_> = records.iter().map(|r| r.to_stored()).collect();
    write_jsonl(&cfg.out(RECORDS_FILE), &header, &rows)?;
    write_json(&cfg.out(SPLIT_FILE), &SplitFile { config_hash: hash.clone(), split: split.clone() })?;
    let report = IngestReport {
        config_hash: hash,
        input_hash: file_hash(&input)?,
        rows: loaded.records.len() + loaded.total_rejected(),
        accepted: records.len(),
        rejected,
        train: split.train.len(),
        valid: split.valid.len(),
        test: split.test.len(),
        shipped_split: shipped,
    };
    write_json(&cfg.out(INGEST_REPORT), &report)?;
    Ok(report)
}

/// Record store, element set and split of an ingested run.
pub struct Store {
    pub records: Vec<ReactionRecord>,
    pub elements: ElementSet,
    pub split: DatasetSplit,
    pub hash: String,
}

impl Store {
    pub fn open(cfg: &RunConfig) -> Result<Store, CliError> {
        let path = cfg.out(RECORDS_FILE);
        let (records, elements) = read_record_store(&path)?;
        let split: SplitFile = read_json(&cfg.out(SPLIT_FILE))?;
        Ok(Store { records, elements, split: split.split, hash: file_hash(&path)? })
    }

    /// Records of one split, in split order.
    pub fn subset(&self, name: SplitName) -> Vec<ReactionRecord> {
        let ids = match name {
            SplitName::Train => &self.split.train,
            SplitName::Valid => &self.split.valid,
            SplitName::Test => &self.split.test,
        };
        let by_id: BTreeMap<&str, &ReactionRecord> = self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        ids.iter().filter_map(|id| by_id.get(id.as_str()).map(|r| (*r).clone())).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitBuild {
    pub total: usize,
    pub built: usize,
    /// Records without a path, by error kind.
    pub rejected: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub config_hash: String,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub splits: BTreeMap<String, SplitBuild>,
    /// Training paths that replay to their recorded reactants.
    pub replayed: usize,
    pub replay_rate: f64,
    pub mismatches: Vec<Mismatch>,
}

/// Builds the motif vocabulary over the training split and a path for
/// every record it covers, then replays the training paths.
pub fn build(cfg: &RunConfig) -> Result<BuildReport, CliError> {
    let store = Store::open(cfg)?;
    let train = store.subset(SplitName::Train);
    let vocab = build_vocab(&train, &store.hash)?.vocab;
    let hash = cfg.hash();
    let mut splits = BTreeMap::new();
    let mut paths: Vec<TransformationPath> = Vec::new();
    for name in [SplitName::Train, SplitName::Valid, SplitName::Test] {
        let records = store.subset(name);
        let mut s = SplitBuild { total: records.len(), ..Default::default() };
        for r in &records {
            match build_paths(r, &vocab) {
                Ok(p) => {
                    s.built += 1;
                    paths.push(p);
                }
                Err(e) => *s.rejected.entry(e.kind().to_string()).or_default() += 1,
            }
        }
        splits.insert(name.as_str().to_string(), s);
    }
    let rt = round_trip(&train, Some(&vocab));

    let vocab_header = Header::new(VOCAB_FORMAT, VOCAB_VERSION)
        .with("corpus_hash", &vocab.corpus_hash)
        .with("size", vocab.len())
        .with("config_hash", &hash);
    write_jsonl(&cfg.out(VOCAB_FILE), &vocab_header, &vocab.entries)?;
    let paths_header =
        Header::new(PATHS_FORMAT, PATHS_VERSION).with("vocab_hash", vocab.content_hash()).with("config_hash", &hash);
    write_jsonl(&cfg.out(PATHS_FILE), &paths_header, &paths)?;
    let report = BuildReport {
        config_hash: hash,
        vocab_size: vocab.len(),
        vocab_hash: vocab.content_hash(),
        splits,
        replayed: rt.replayed,
        replay_rate: rt.replay_rate(),
        mismatches: rt.mismatches,
    };
    write_json(&cfg.out(BUILD_REPORT), &report)?;
    Ok(report)
}

pub fn load_vocab(cfg: &RunConfig, explicit: Option<&Path>) -> Result<MotifVocab, CliError> {
    let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| cfg.out(VOCAB_FILE));
    Ok(MotifVocab::load(&path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub records: usize,
    pub epochs: usize,
    pub steps: u64,
    pub epoch_losses: Vec<f64>,
    pub checkpoint: PathBuf,
}

/// Trains on the built training paths, resuming from the last
/// checkpoint when `resume` is set and one exists.
pub fn train(cfg: &RunConfig, resume: bool) -> Result<TrainSummary, CliError> {
    let store = Store::open(cfg)?;
    let vocab = load_vocab(cfg, None)?;
    let (_, paths): (Header, Vec<TransformationPath>) = read_jsonl(&cfg.out(PATHS_FILE), PATHS_FORMAT, PATHS_VERSION)?;
    let by_id: BTreeMap<&str, &TransformationPath> = paths.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut records: Vec<(ReactionRecord, &TransformationPath)> =
        store.subset(SplitName::Train).into_iter().filter_map(|r| by_id.get(r.id.as_str()).map(|p| (r, *p))).collect();
    if let Some(n) = cfg.data.max_train_records {
        records.truncate(n);
    }
    if records.is_empty() {
        return Err(CliError::Data("no training paths; run build first".into()));
    }

    let hash = cfg.hash();
    let ck_dir = cfg.out(CHECKPOINT_DIR);
    let last = ck_dir.join("last.ckpt");
    let log_path = cfg.out(TRAIN_LOG);
    let mut trainer = if resume && last.exists() {
        let ck = load_checkpoint::<f32>(&last)?;
        if ck.vocab_hash != vocab.content_hash() {
            return Err(CliError::Data(format!("{}: trained against a different vocabulary", last.display())));
        }
        Trainer::resume(ck, cfg.train.clone())?
    } else {
        if log_path.exists() {
            fs::remove_file(&log_path)?;
        }
        let model: Model<f32> = Model::new(&cfg.model, store.elements.clone(), vocab.len())?;
        Trainer::new(model, cfg.train.clone())?
    };
    let plans = records
        .iter()
        .map(|(r, p)| plan_path(&trainer.model, &r.id, &r.product, r.class, &p.target, &vocab))
        .collect::<Result<Vec<_>, ModelError>>()?;
    let opts = TrainOptions {
        checkpoint_dir: Some(ck_dir),
        log_path: Some(log_path),
        config_hash: hash.clone(),
        vocab_hash: vocab.content_hash(),
        extra: BTreeMap::new(),
    };
    let report = trainer.fit(&plans, &opts)?;
    Ok(TrainSummary {
        config_hash: hash,
        records: plans.len(),
        epochs: trainer.state.epoch,
        steps: report.steps,
        epoch_losses: report.epoch_losses,
        checkpoint: last,
    })
}

fn open_model(cfg: &RunConfig, checkpoint: &Path, vocab: Option<&Path>) -> Result<(Model<f32>, MotifVocab), CliError> {
    let ck = load_checkpoint::<f32>(checkpoint)?;
    let vocab = load_vocab(cfg, vocab)?;
    if !ck.vocab_hash.is_empty() && ck.vocab_hash != vocab.content_hash() {
        return Err(CliError::Data(format!("{}: trained against a different vocabulary", checkpoint.display())));
    }
    if ck.model.vocab_size != vocab.len() {
        return Err(CliError::Data(format!("model has {} motifs, vocabulary {}", ck.model.vocab_size, vocab.len())));
    }
    Ok((ck.model, vocab))
}

/// One product to decode.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub smiles: String,
    pub class: Option<u8>,
}

/// Reads products from a file with one SMILES per line, optionally
/// preceded by an id and a tab.
pub fn read_queries(path: &Path, class: Option<u8>) -> Result<Vec<Query>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, smiles) = match line.split_once('\t') {
            Some((id, s)) => (id.trim().to_string(), s.trim().to_string()),
            None => (format!("line{}", i + 1), line.to_string()),
        };
        out.push(Query { id, smiles, class });
    }
    Ok(out)
}

/// Decodes each query with beam search. Products that fail to parse are a
/// data error; products without any valid hypothesis yield no rows.
pub fn predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    vocab: Option<&Path>,
    queries: &[Query],
    sink: &mut dyn Write,
) -> Result<Vec<PredictionRow>, CliError> {
    let (model, vocab) = open_model(cfg, checkpoint, vocab)?;
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for q in queries {
        let g = parse_smiles(&q.smiles).map_err(|e| CliError::Data(format!("{}: {e}", q.id)))?;
        let product = canonical_product(&g);
        let preds = match beam_search(&model, &vocab, &product, q.class, &cfg.beam) {
            Ok(p) => p,
            Err(ModelError::NoValidHypothesis) => {
                log::warn!("{}: no valid hypothesis", q.id);
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        };
        for p in preds {
            let row = PredictionRow {
                id: q.id.clone(),
                rank: p.rank,
                reactants: p.smiles(),
                log_prob: p.log_prob,
                config_hash: hash.clone(),
            };
            serde_json::to_writer(&mut *sink, &row)?;
            sink.write_all(b"\n")?;
            rows.push(row);
        }
    }
    sink.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub checkpoint_config_hash: String,
    pub split: SplitName,
    pub records: usize,
    pub k: usize,
    /// Exact-match accuracy among the first n predictions, for n in 1, 3,
    /// 5 and 10.
    pub top_k_accuracy: BTreeMap<String, f64>,
    /// Records for which decoding produced nothing.
    pub failures: usize,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = format!("split {}  records {}  k {}\n", self.split.as_str(), self.records, self.k);
        for n in TOP_N {
            s.push_str(&format!("{:>9}", format!("top-{n}")));
        }
        s.push('\n');
        for n in TOP_N {
            s.push_str(&format!("{:>8.1}%", 100.0 * self.top_k_accuracy[&n.to_string()]));
        }
        s.push('\n');
        s
    }
}

pub fn predictions_file(split: SplitName) -> String {
    format!("predictions-{}.jsonl", split.as_str())
}

pub fn eval_file(split: SplitName) -> String {
    format!("eval-{}.json", split.as_str())
}

/// Decodes every record of the configured split and reports top-n
/// exact-match accuracy.
pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalReport, CliError> {
    let store = Store::open(cfg)?;
    let ck_hash = load_checkpoint::<f32>(checkpoint)?.config_hash;
    let (model, vocab) = open_model(cfg, checkpoint, None)?;
    let mut records = store.subset(cfg.eval.split);
    if let Some(n) = cfg.eval.limit {
        records.truncate(n);
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("split {} is empty", cfg.eval.split.as_str())));
    }
    let hash = cfg.hash();
    let mut rows = Vec::new();
    let report = evaluate_topk(&model, &vocab, &records, &cfg.beam, cfg.eval.workers, &hash, |r| rows.push(r))?;
    let mut out = BufWriter::new(File::create(cfg.out(&predictions_file(cfg.eval.split)))?);
    for r in &rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let eval = EvalReport {
        config_hash: hash,
        checkpoint_config_hash: ck_hash,
        split: cfg.eval.split,
        records: report.records,
        k: cfg.beam.k,
        top_k_accuracy: report.accuracy.iter().map(|(n, a)| (n.to_string(), *a)).collect(),
        failures: report.failures,
    };
    write_json(&cfg.out(&eval_file(cfg.eval.split)), &eval)?;
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripSummary {
    pub config_hash: String,
    pub total: usize,
    pub built: usize,
    pub replayed: usize,
    pub build_rate: f64,
    pub replay_rate: f64,
    pub rejected: BTreeMap<String, usize>,
    pub vocab_size: usize,
    pub mismatches: Vec<Mismatch>,
}

/// Builds and replays every record of the store (or one split) against
/// the given vocabulary, or one built from those records.
pub fn roundtrip(cfg: &RunConfig, split: Option<SplitName>, vocab: Option<&Path>) -> Result<RoundTripSummary, CliError> {
    let store = Store::open(cfg)?;
    let records = match split {
        Some(s) => store.subset(s),
        None => store.records.clone(),
    };
    let vocab = vocab.map(MotifVocab::load).transpose()?;
    let rt = round_trip(&records, vocab.as_ref());
    let summary = RoundTripSummary {
        config_hash: cfg.hash(),
        total: rt.total,
        built: rt.built,
        replayed: rt.replayed,
        build_rate: rt.build_rate(),
        replay_rate: rt.replay_rate(),
        rejected: rt.rejected.clone(),
        vocab_size: rt.vocab_size,
        mismatches: rt.mismatches,
    };
    write_json(&cfg.out(ROUNDTRIP_REPORT), &summary)?;
    Ok(summary)
}

/// Set difference view of one mismatch: `-` lines were expected and not
/// produced, `+` lines were produced and not expected.
pub fn mismatch_diff(m: &Mismatch) -> String {
    let mut s = format!("{}\n", m.id);
    match &m.got {
        Ok(got) => {
            let want: BTreeSet<&String> = m.expected.iter().collect();
            let have: BTreeSet<&String> = got.iter().collect();
            for x in want.difference(&have) {
                s.push_str(&format!("  - {x}\n"));
            }
            for x in have.difference(&want) {
                s.push_str(&format!("  + {x}\n"));
            }
        }
        Err(e) => {
            for x in &m.expected {
                s.push_str(&format!("  - {x}\n"));
            }
            s.push_str(&format!("  ! {e}\n"));
        }
    }
    s
}

/// One line of a canonicalization listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonRow {
    pub line: usize,
    pub input: String,
    pub canonical: String,
    pub error: String,
}

/// Canonicalizes one SMILES per line. Parse failures are reported per row
/// and never abort the listing.
pub fn canon(input: &Path) -> Result<Vec<CanonRow>, CliError> {
    let file = File::open(input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let (canonical, error) = match canonicalize(text) {
            Ok(c) => (c, String::new()),
            Err(e) => (String::new(), e.to_string()),
        };
        rows.push(CanonRow { line: i + 1, input: text.to_string(), canonical, error });
    }
    Ok(rows)
}

pub fn write_canon_csv(rows: &[CanonRow], out: &mut dyn Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
