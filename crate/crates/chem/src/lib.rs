//! Molecular graphs for retrosynthesis: SMILES in and out, sanitization,
//! canonical ranking and the atom/bond feature vectors used by the model.

pub mod canon;
pub mod element;
pub mod error;
pub mod features;
pub mod graph;
pub mod rings;
pub mod sanitize;
pub mod smiles;

pub use canon::{canonical_ranks, symmetry_classes, RankOptions};
pub use element::Element;
pub use error::ChemError;
pub use features::{featurize, ElementSet, FeatureVectors, ATOM_FEATURES, BOND_FEATURES};
pub use graph::{Atom, Bond, BondOrder, BondStereo, BondType, ChiralTag, Hybridization, MolGraph, ObjectKind};
pub use sanitize::{kekulize, sanitize, sanitize_with, SanitizeOptions, ValenceMode};
pub use smiles::{
    canonicalize, implicit_hydrogens, parse_smiles, parse_smiles_raw, write_canonical_smiles, write_canonical_smiles_with,
    write_ranked, WriteOptions,
};
