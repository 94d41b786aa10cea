//! Reaction ingestion, reaction-center edits, motif extraction, the motif
//! vocabulary, transformation paths and the engine that replays them.

pub mod edits;
pub mod engine;
pub mod error;
pub mod fuzz;
pub mod jsonl;
pub mod motif;
pub mod path;
pub mod record;
pub mod roundtrip;
pub mod shortcut;
pub mod split;
pub mod tree;

pub use error::CoreError;
pub use record::{load_reactions, parse_reaction, read_record_store, write_record_store, LoadReport, ReactionRecord};
pub use shortcut::{canonical_product, remove_mapping_shortcut};
pub use split::{split_dataset, split_sizes, DatasetSplit};
pub use edits::{compute_edits, Alignment, EditAction, EditSet, EditState};
pub use engine::{apply_path, GraphState, Phase};
pub use motif::{extract_motifs, Motif, MotifNode, MotifVocab};
pub use path::{build_paths, build_vocab, derive, Token, TransformationPath};
pub use tree::{build_junction_tree, linearize, JunctionTree};
pub use roundtrip::{round_trip, RoundTripReport};
