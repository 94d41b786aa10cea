//! Teacher-forced training with Adam, cosine restarts, gradient clipping,
//! per-epoch checkpoints and a line-delimited JSON log.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{save_checkpoint, Checkpoint, TrainState};
use crate::error::ModelError;
use crate::forward::{forward_teacher_forced, teacher_forced_loss, LossValues};
use crate::model::Model;
use crate::nn::Dropout;
use crate::optim::{clip_global_norm, Adam, CosineRestarts};
use crate::plan::RecordPlan;
use crate::tape::{Grads, Tape};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_min: f64,
    /// Length of one cosine cycle, in epochs.
    pub restart_epochs: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// Threads sharing each batch. Results depend on this value but are
    /// reproducible for a fixed value.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 3e-4,
            lr_min: 0.0,
            restart_epochs: 20.0,
            clip_norm: 5.0,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 || self.workers == 0 {
            return Err(ModelError::Config("epochs, batch_size and workers must be positive".into()));
        }
        if !(self.lr > 0.0 && self.restart_epochs > 0.0 && self.clip_norm > 0.0) {
            return Err(ModelError::Config("lr, restart_epochs and clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> CosineRestarts {
        CosineRestarts { base: self.lr, min: self.lr_min, cycle: self.restart_epochs }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub grad_norm: f64,
    pub loss: LossValues,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory receiving `epoch-NNN.ckpt` and `last.ckpt`.
    pub checkpoint_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub config_hash: String,
    pub vocab_hash: String,
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

pub struct Trainer<T: Scalar> {
    pub model: Model<T>,
    pub config: TrainConfig,
    pub adam: Adam<T>,
    pub state: TrainState,
}

/// Summed gradient and per-record losses of a run of records.
type ChunkGrads<T> = (Grads<T>, Vec<LossValues>);

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Loss and gradient of one record.
pub fn record_gradient<T: Scalar>(
    model: &Model<T>,
    plan: &RecordPlan<T>,
    drop: &mut Dropout,
    grads: &mut Grads<T>,
) -> Result<LossValues, ModelError> {
    let mut tape = Tape::new(&model.params);
    let heads = forward_teacher_forced(model, &mut tape, plan, drop)?;
    let terms = teacher_forced_loss(model, &mut tape, plan, &heads);
    let values = terms.values(&tape);
    if values.is_finite() {
        tape.backward_into(terms.total, grads);
    }
    Ok(values)
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Trainer<T>, ModelError> {
        config.validate()?;
        let adam = Adam::new(&model.params);
        Ok(Trainer { model, config, adam, state: TrainState::default() })
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ck: Checkpoint<T>, config: TrainConfig) -> Result<Trainer<T>, ModelError> {
        config.validate()?;
        let adam = ck.adam.ok_or_else(|| ModelError::Checkpoint("checkpoint has no optimizer state".into()))?;
        Ok(Trainer { model: ck.model, config, adam, state: ck.state })
    }

    pub fn checkpoint(&self, opts: &TrainOptions) -> Checkpoint<T> {
        let mut extra = opts.extra.clone();
        extra.insert("train_config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        Checkpoint {
            model: self.model.clone(),
            config_hash: opts.config_hash.clone(),
            vocab_hash: opts.vocab_hash.clone(),
            state: self.state.clone(),
            adam: Some(self.adam.clone()),
            extra,
        }
    }

    fn batch_gradient(&self, plans: &[RecordPlan<T>], batch: &[usize], epoch: usize) -> Result<ChunkGrads<T>, ModelError> {
        let workers = self.config.workers.min(batch.len()).max(1);
        let chunk = batch.len().div_ceil(workers);
        let seed = self.config.seed;
        let model = &self.model;
        let run = |part: &[usize]| -> Result<ChunkGrads<T>, ModelError> {
            let mut grads = Grads::zeros_like(&model.params);
            let mut losses = Vec::with_capacity(part.len());
            for &i in part {
                let mut drop = Dropout::on(ChaCha8Rng::seed_from_u64(mix(seed, epoch as u64 + 1, i as u64 + 1)));
                losses.push(record_gradient(model, &plans[i], &mut drop, &mut grads)?);
            }
            Ok((grads, losses))
        };
        let parts: Vec<Result<ChunkGrads<T>, ModelError>> = if workers == 1 {
            vec![run(batch)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch.chunks(chunk).map(|part| s.spawn(move || run(part))).collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        let mut total = Grads::zeros_like(&model.params);
        let mut losses = Vec::with_capacity(batch.len());
        for p in parts {
            let (g, l) = p?;
            total.add_assign(&g);
            losses.extend(l);
        }
        Ok((total, losses))
    }

    /// Runs one epoch and returns its mean record loss.
    pub fn run_epoch(&mut self, plans: &[RecordPlan<T>], opts: &TrainOptions, log: Option<&mut dyn Write>) -> Result<f64, ModelError> {
        let epoch = self.state.epoch;
        let mut order: Vec<usize> = (0..plans.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(self.config.seed, epoch as u64 + 1, 0)));
        let batches: Vec<&[usize]> = order.chunks(self.config.batch_size).collect();
        let schedule = self.config.schedule();
        let mut sum = 0.0;
        let mut log = log;
        for (b, batch) in batches.iter().enumerate() {
            let (mut grads, losses) = self.batch_gradient(plans, batch, epoch)?;
            for (k, l) in losses.iter().enumerate() {
                if !l.is_finite() {
                    return Err(ModelError::NonFiniteLoss {
                        epoch,
                        step: self.state.step as usize,
                        record: plans[batch[k]].id.clone(),
                        detail: format!("{l:?}"),
                    });
                }
            }
            let mut mean = LossValues::default();
            for l in &losses {
                mean.add(l);
            }
            let mean = mean.scaled(1.0 / batch.len() as f64);
            grads.scale(T::from(1.0 / batch.len() as f64).unwrap());
            let norm = clip_global_norm(&mut grads, self.config.clip_norm);
            if !norm.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    step: self.state.step as usize,
                    record: String::new(),
                    detail: format!("gradient norm {norm}"),
                });
            }
            let lr = schedule.rate(epoch as f64 + b as f64 / batches.len() as f64);
            self.adam.update(&mut self.model.params, &grads, lr);
            self.state.step += 1;
            sum += mean.total * batch.len() as f64;
            if let Some(w) = log.as_deref_mut() {
                let line = LogLine {
                    epoch,
                    step: self.state.step,
                    lr,
                    grad_norm: norm,
                    loss: mean,
                    config_hash: opts.config_hash.clone(),
                };
                writeln!(w, "{}", serde_json::to_string(&line)?)?;
            }
        }
        let mean = sum / plans.len().max(1) as f64;
        self.state.epoch += 1;
        self.state.loss_curve.push(mean);
        Ok(mean)
    }

    /// Trains until `config.epochs` epochs are complete, checkpointing
    /// after each epoch.
    pub fn fit(&mut self, plans: &[RecordPlan<T>], opts: &TrainOptions) -> Result<TrainReport, ModelError> {
        if plans.is_empty() {
            return Err(ModelError::Config("no training records".into()));
        }
        let mut log: Option<BufWriter<File>> = match &opts.log_path {
            Some(p) => Some(BufWriter::new(OpenOptions::new().create(true).append(true).open(p)?)),
            None => None,
        };
        if let Some(dir) = &opts.checkpoint_dir {
            fs::create_dir_all(dir)?;
        }
        while self.state.epoch < self.config.epochs {
            let mean = self.run_epoch(plans, opts, log.as_mut().map(|w| w as &mut dyn Write))?;
            log::info!("epoch {} loss {mean:.5}", self.state.epoch);
            if let Some(w) = log.as_mut() {
                w.flush()?;
            }
            if let Some(dir) = &opts.checkpoint_dir {
                let ck = self.checkpoint(opts);
                save_checkpoint(&dir.join(format!("epoch-{:03}.ckpt", self.state.epoch)), &ck)?;
                save_checkpoint(&dir.join("last.ckpt"), &ck)?;
            }
        }
        Ok(TrainReport { epoch_losses: self.state.loss_curve.clone(), steps: self.state.step })
    }
}

/// Trains a model from scratch on prebuilt plans.
pub fn train<T: Scalar>(
    model: Model<T>,
    plans: &[RecordPlan<T>],
    config: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(Model<T>, TrainReport), ModelError> {
    let mut t = Trainer::new(model, config.clone())?;
    let report = t.fit(plans, opts)?;
    Ok((t.model, report))
}
