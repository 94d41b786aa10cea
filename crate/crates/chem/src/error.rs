use thiserror::Error;

use crate::graph::ObjectKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("SMILES syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unsupported element {0}")]
    UnsupportedElement(String),
    #[error("atom {atom} ({element}) has invalid valence {valence}")]
    Valence { atom: usize, element: String, valence: u32 },
    #[error("cannot kekulize aromatic system containing atom {atom}")]
    Kekulize { atom: usize },
    #[error("{kind:?} index {index} out of range")]
    IndexOutOfRange { kind: ObjectKind, index: usize },
    #[error("invalid bond between atoms {begin} and {end}")]
    InvalidBond { begin: usize, end: usize },
    #[error("duplicate bond between atoms {begin} and {end}")]
    DuplicateBond { begin: usize, end: usize },
}
