mod parse;
mod write;

pub use parse::{implicit_hydrogens, parse_smiles_raw};
pub use write::{write_canonical_smiles, write_canonical_smiles_with, write_ranked, WriteOptions};

use crate::error::ChemError;
use crate::graph::MolGraph;
use crate::sanitize::sanitize;

/// Parses and sanitizes a SMILES string.
pub fn parse_smiles(text: &str) -> Result<MolGraph, ChemError> {
    let mut g = parse_smiles_raw(text)?;
    sanitize(&mut g)?;
    Ok(g)
}

/// Canonical form of a SMILES string with map numbers removed.
pub fn canonicalize(text: &str) -> Result<String, ChemError> {
    let g = parse_smiles(text)?;
    Ok(write_canonical_smiles_with(&g, WriteOptions { strip_maps: true }))
}
