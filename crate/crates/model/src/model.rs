//! The full model: encoder and decoder over one parameter store.

use mars_chem::features::atom_feature_width;
use mars_chem::{featurize, ElementSet, MolGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{Decoder, DecoderConfig};
use crate::encoder::{Encoder, EncoderConfig, GraphInput};
use crate::error::ModelError;
use crate::params::ParamStore;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    /// Append the reaction class one-hot to atom features.
    pub use_class: bool,
    /// Seed for parameter initialization.
    pub seed: u64,
}


impl ModelConfig {
    /// Tiny dimensions for gradient checks and unit tests.
    pub fn tiny(dim: usize) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig { layers: 2, heads: 2, dim, ..EncoderConfig::default() },
            decoder: DecoderConfig { motif_embed: dim, ..DecoderConfig::default().without_dropout() },
            use_class: false,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub elements: ElementSet,
    pub vocab_size: usize,
    pub params: ParamStore<T>,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: &ModelConfig, elements: ElementSet, vocab_size: usize) -> Result<Model<T>, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let width = atom_feature_width(config.use_class);
        let encoder = Encoder::new(&mut params, &config.encoder, width, &mut rng)?;
        let decoder = Decoder::new(&mut params, &config.decoder, config.encoder.dim, vocab_size, &mut rng);
        Ok(Model { config: config.clone(), elements, vocab_size, params, encoder, decoder })
    }

    pub fn dim(&self) -> usize {
        self.config.encoder.dim
    }

    pub fn featurize(&self, g: &MolGraph, class: Option<u8>) -> Result<GraphInput<T>, ModelError> {
        let class = if self.config.use_class { class } else { None };
        let mut feats = featurize(g, &self.elements, class)?;
        let width = atom_feature_width(self.config.use_class);
        if feats.atom_width < width {
            // Unknown class: an all-zero class segment.
            let pad = width - feats.atom_width;
            feats.atoms = feats
                .atoms
                .chunks(feats.atom_width)
                .flat_map(|row| row.iter().copied().chain(std::iter::repeat_n(0.0, pad)))
                .collect();
            feats.atom_width = width;
        }
        Ok(GraphInput::new(g, &feats))
    }

    /// The same model with parameters converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            elements: self.elements.clone(),
            vocab_size: self.vocab_size,
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
        }
    }
}
