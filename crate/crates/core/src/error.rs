use mars_chem::ChemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("file format: {0}")]
    FileFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(#[from] ChemError),
    #[error("bad reaction class {0:?}")]
    BadClass(String),
    #[error("malformed reaction SMILES: {0}")]
    MalformedReaction(String),
    #[error("product has {0} components")]
    MultipleProducts(usize),
    #[error("product atom {0} has no map number")]
    UnmappedProductAtom(usize),
    #[error("mapping inconsistent: {0}")]
    MappingInconsistent(String),
    #[error("element {0} outside the element set")]
    UnsupportedElement(String),
    #[error("product equals reactants")]
    NoEditFound,
    #[error("bond formed between product atoms {0} and {1} in the retro direction")]
    BondAddition(usize, usize),
    #[error("charge change of {delta} on product atom {atom}")]
    UnsupportedChargeChange { atom: usize, delta: i8 },
    #[error("reactant atom for product atom {0} has a non-standard hydrogen count")]
    NonStandardValence(usize),
    #[error("leaving group bridges several attachments")]
    CycleDetected,
    #[error("motif with {0} interface atoms")]
    TooManyInterfaces(usize),
    #[error("motif does not sanitize: {0}")]
    MotifSanitize(ChemError),
    #[error("motif {0} not in vocabulary")]
    OutOfVocab(String),
    #[error("grammar violation: {0}")]
    GrammarViolation(String),
    #[error("valence violation: {0}")]
    ValenceViolation(ChemError),
    #[error("motif interface does not match attachment atom {0}")]
    ElementMismatch(usize),
    #[error("unknown motif id {0}")]
    UnknownMotif(usize),
    #[error("path ended before every attachment was filled")]
    IncompletePath,
}

impl CoreError {
    /// Short stable name used when counting rejections.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::FileFormat(_) => "FileFormat",
            CoreError::Io(_) => "Io",
            CoreError::Json(_) => "Json",
            CoreError::Parse(_) => "ParseError",
            CoreError::BadClass(_) => "BadClass",
            CoreError::MalformedReaction(_) => "MalformedReaction",
            CoreError::MultipleProducts(_) => "MultipleProducts",
            CoreError::UnmappedProductAtom(_) => "UnmappedProductAtom",
            CoreError::MappingInconsistent(_) => "MappingInconsistent",
            CoreError::UnsupportedElement(_) => "UnsupportedElement",
            CoreError::NoEditFound => "NoEditFound",
            CoreError::BondAddition(..) => "BondAddition",
            CoreError::UnsupportedChargeChange { .. } => "UnsupportedChargeChange",
            CoreError::NonStandardValence(_) => "NonStandardValence",
            CoreError::CycleDetected => "CycleDetected",
            CoreError::TooManyInterfaces(_) => "TooManyInterfaces",
            CoreError::MotifSanitize(_) => "MotifSanitize",
            CoreError::OutOfVocab(_) => "OutOfVocabMotif",
            CoreError::GrammarViolation(_) => "GrammarViolation",
            CoreError::ValenceViolation(_) => "ValenceViolation",
            CoreError::ElementMismatch(_) => "ElementMismatch",
            CoreError::UnknownMotif(_) => "UnknownMotif",
            CoreError::IncompletePath => "IncompletePath",
        }
    }
}
