//! Neural retrosynthesis model: a message-passing graph encoder, a GRU
//! decoder that emits transformation paths, teacher-forced training and
//! beam-search inference.
//!
//! Everything numeric is generic over [`Scalar`]; training runs in `f32`
//! and gradient checks in `f64`.

pub mod beam;
pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod forward;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod optim;
pub mod params;
pub mod plan;
pub mod tape;
pub mod trainer;

use std::fmt::Debug;

use num_traits::{Float, NumAssign};

/// Floating-point element type of tensors and parameters.
pub trait Scalar: Float + NumAssign + Debug + Default + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub use beam::{beam_search, exhaustive_search, greedy_decode, BeamConfig, Prediction};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use decoder::{Decoder, DecoderConfig};
pub use encoder::{Encoder, EncoderConfig, Flavor, GraphEmbedding, GraphInput, Pooling};
pub use error::ModelError;
pub use eval::{evaluate_topk, TopkReport};
pub use forward::{forward_teacher_forced, path_log_probs, teacher_forced_loss, LossValues};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{Model, ModelConfig};
pub use params::{ParamStore, Tensor};
pub use plan::{plan_path, RecordPlan};
pub use tape::{Grads, Tape, Var};
pub use trainer::{train, TrainConfig, TrainReport};

/// Single-precision model used for training and inference.
pub type Model32 = Model<f32>;
/// Double-precision model used for gradient verification.
pub type Model64 = Model<f64>;
