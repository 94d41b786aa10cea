//! Transformation tokens and the paired input/target paths.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edits::{compute_edits_aligned, Alignment, EditAction};
use crate::error::CoreError;
use crate::jsonl::{read_jsonl, write_jsonl, Header};
use crate::motif::{extract_motifs, MotifNode, MotifVocab};
use crate::record::ReactionRecord;
use crate::tree::{build_junction_tree, linearize, JunctionTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Start,
    Edit(EditAction),
    FinishEdit,
    /// Merge interface `interface` of motif `motif` into the atom
    /// `attachment` of the current graph.
    AddingMotif { attachment: usize, motif: usize, interface: usize },
}

/// Teacher-forcing pair: `input[t]` is the token consumed at step `t`, and
/// `target[t]` is the decision supervised at that step. The attachment
/// filled by an AddingMotif target is the one pending after `input[t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationPath {
    pub id: String,
    pub input: Vec<Token>,
    pub target: Vec<Token>,
    /// Root attachments (product atom indices, ascending).
    pub attachments: Vec<usize>,
}

impl TransformationPath {
    pub fn from_target(id: &str, target: Vec<Token>, attachments: Vec<usize>) -> TransformationPath {
        let mut input = Vec::with_capacity(target.len());
        input.push(Token::Start);
        input.extend_from_slice(&target[..target.len().saturating_sub(1)]);
        TransformationPath { id: id.to_string(), input, target, attachments }
    }

    pub fn num_edits(&self) -> usize {
        self.target.iter().filter(|t| matches!(t, Token::Edit(_))).count()
    }
}

/// Everything derived from one record on the way to its path.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub alignment: Alignment,
    pub edits: Vec<EditAction>,
    pub attachments: Vec<usize>,
    pub motifs: Vec<MotifNode>,
}

pub fn derive(r: &ReactionRecord) -> Result<Derivation, CoreError> {
    let alignment = Alignment::new(r)?;
    let es = compute_edits_aligned(&alignment)?;
    let motifs = extract_motifs(&alignment, &es.attachments)?;
    Ok(Derivation { alignment, edits: es.edits, attachments: es.attachments, motifs })
}

impl Derivation {
    pub fn junction_tree(&self, vocab: &MotifVocab) -> Result<JunctionTree, CoreError> {
        build_junction_tree(self.alignment.product.num_atoms(), &self.attachments, &self.motifs, vocab)
    }

    pub fn path(&self, id: &str, vocab: &MotifVocab) -> Result<TransformationPath, CoreError> {
        let tree = self.junction_tree(vocab)?;
        let mut target: Vec<Token> = self.edits.iter().map(|&e| Token::Edit(e)).collect();
        target.push(Token::FinishEdit);
        target.extend(linearize(&tree, vocab)?);
        Ok(TransformationPath::from_target(id, target, self.attachments.clone()))
    }
}

pub fn build_paths(r: &ReactionRecord, vocab: &MotifVocab) -> Result<TransformationPath, CoreError> {
    derive(r)?.path(&r.id, vocab)
}

/// Result of building a vocabulary over a record set.
#[derive(Debug, Clone)]
pub struct VocabBuild {
    pub vocab: MotifVocab,
    pub built: usize,
    pub rejected: BTreeMap<String, usize>,
}

pub fn build_vocab(records: &[ReactionRecord], corpus_hash: &str) -> Result<VocabBuild, CoreError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut rejected = BTreeMap::new();
    let mut built = 0;
    for r in records {
        match derive(r) {
            Ok(d) => {
                built += 1;
                let mut keys = Vec::new();
                for m in &d.motifs {
                    m.keys(&mut keys);
                }
                for k in keys {
                    *counts.entry(k.to_string()).or_default() += 1;
                }
            }
            Err(e) => *rejected.entry(e.kind().to_string()).or_default() += 1,
        }
    }
    Ok(VocabBuild { vocab: MotifVocab::from_counts(&counts, corpus_hash)?, built, rejected })
}

pub const PATHS_FORMAT: &str = "mars-paths";
pub const PATHS_VERSION: u32 = 1;

pub fn write_paths(path: &Path, paths: &[TransformationPath], vocab: &MotifVocab) -> Result<(), CoreError> {
    let header = Header::new(PATHS_FORMAT, PATHS_VERSION).with("vocab_hash", vocab.content_hash());
    write_jsonl(path, &header, paths)
}

/// Reads a paths file, checking it was built against `vocab`.
pub fn read_paths(path: &Path, vocab: &MotifVocab) -> Result<Vec<TransformationPath>, CoreError> {
    let (header, rows): (Header, Vec<TransformationPath>) = read_jsonl(path, PATHS_FORMAT, PATHS_VERSION)?;
    if header.get::<String>("vocab_hash").as_deref() != Some(vocab.content_hash().as_str()) {
        return Err(CoreError::FileFormat(format!("{}: built against a different vocabulary", path.display())));
    }
    Ok(rows)
}
