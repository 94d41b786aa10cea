//! Teacher-forced decoding, the training loss and exact path scoring.

use std::collections::BTreeMap;

use mars_chem::MolGraph;
use mars_core::{MotifVocab, Token};
use serde::{Deserialize, Serialize};

use crate::decoder::{interface_mask, ACTION_ADD, ACTION_EDIT, ACTION_FINISH};
use crate::encoder::Encoded;
use crate::error::ModelError;
use crate::model::Model;
use crate::nn::Dropout;
use crate::plan::{plan_path, AttachRef, InputSpec, RecordPlan, TargetSpec};
use crate::tape::{masked_log_softmax, softplus, Tape, Var};
use crate::Scalar;

/// Head outputs at one step; only the heads supervised at that step are
/// evaluated.
#[derive(Debug, Clone, Copy)]
pub struct StepHeads {
    pub action: Var,
    /// Edit-score logits (`N×1`) and the bond-type logits of the target
    /// object (`1×4`).
    pub edit: Option<(Var, Var)>,
    /// Motif logits and the interface logits of the target motif.
    pub adding: Option<(Var, Var)>,
}

/// Runs the decoder over a plan with ground-truth inputs.
pub fn forward_teacher_forced<T: Scalar>(
    model: &Model<T>,
    tape: &mut Tape<T>,
    plan: &RecordPlan<T>,
    drop: &mut Dropout,
) -> Result<Vec<StepHeads>, ModelError> {
    let enc = &model.encoder;
    let dec = &model.decoder;
    let use_syn = dec.config.use_synthon;
    let product = enc.forward(tape, &plan.product, true)?;
    let ctx = dec.object_context(tape, product.objects.expect("requested"));
    let h_g = product.graph;
    let mut hidden = dec.init_hidden(tape, h_g, drop);
    let synthon: Option<Encoded> = plan.synthon.as_ref().map(|s| enc.forward(tape, s, false)).transpose()?;
    let mut motifs: BTreeMap<usize, Var> = BTreeMap::new();
    for (&z, g) in &plan.motifs {
        motifs.insert(z, enc.forward(tape, g, false)?.atoms);
    }
    let mut out = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        let input = match step.input {
            InputSpec::Zero => tape.zeros(1, model.dim()),
            InputSpec::Edit { object, slot } => {
                let h_syn = if use_syn {
                    enc.forward(tape, step.graph.as_ref().expect("edit steps carry a graph"), false)?.graph
                } else {
                    tape.zeros(1, model.dim())
                };
                dec.edit_input(tape, h_syn, &ctx, object, slot)
            }
            InputSpec::Adding { attachment, motif } => {
                let s = synthon.expect("adding steps follow the synthon");
                let rep = match attachment {
                    AttachRef::Root(a) => tape.gather(s.atoms, &[a]),
                    AttachRef::Motif { motif, atom } => tape.gather(motifs[&motif], &[atom]),
                };
                dec.adding_input(tape, s.graph, rep, motif)
            }
        };
        let (next, psi) = dec.step(tape, h_g, input, &hidden);
        hidden = next;
        let action = dec.action_logits(tape, psi);
        let mut heads = StepHeads { action, edit: None, adding: None };
        match &step.target {
            TargetSpec::Edit { object, .. } => {
                let scores = dec.target_logits(tape, psi, &ctx, drop);
                let types = dec.type_logits(tape, psi, &ctx, &[*object]);
                heads.edit = Some((scores, types));
            }
            TargetSpec::Adding { motif, .. } => {
                let ml = dec.motif_logits(tape, psi, drop);
                let items = dec.interface_items(tape, &[*motif]);
                let il = dec.interface_logits(tape, psi, items);
                heads.adding = Some((ml, il));
            }
            TargetSpec::Finish => {}
        }
        out.push(heads);
    }
    Ok(out)
}

/// Loss components as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub action: Var,
    pub edit_bce: Var,
    pub bond_type: Var,
    pub motif: Var,
    pub interface: Var,
}

/// Loss components as numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub action: f64,
    pub edit_bce: f64,
    pub bond_type: f64,
    pub motif: f64,
    pub interface: f64,
}

impl LossValues {
    pub fn add(&mut self, o: &LossValues) {
        self.total += o.total;
        self.action += o.action;
        self.edit_bce += o.edit_bce;
        self.bond_type += o.bond_type;
        self.motif += o.motif;
        self.interface += o.interface;
    }

    pub fn scaled(&self, s: f64) -> LossValues {
        LossValues {
            total: self.total * s,
            action: self.action * s,
            edit_bce: self.edit_bce * s,
            bond_type: self.bond_type * s,
            motif: self.motif * s,
            interface: self.interface * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.total, self.action, self.edit_bce, self.bond_type, self.motif, self.interface].iter().all(|x| x.is_finite())
    }
}

fn sum_or_zero<T: Scalar>(tape: &mut Tape<T>, xs: &[Var]) -> Var {
    if xs.is_empty() {
        tape.zeros(1, 1)
    } else {
        tape.add_n(xs)
    }
}

/// Action cross-entropy on every step, edit-score BCE over all objects and
/// bond-type cross-entropy on edit steps, motif and interface
/// cross-entropies on adding steps.
pub fn teacher_forced_loss<T: Scalar>(
    model: &Model<T>,
    tape: &mut Tape<T>,
    plan: &RecordPlan<T>,
    heads: &[StepHeads],
) -> LossTerms {
    let motif_mask = model.decoder.motif_mask();
    let (mut act, mut bce, mut ty, mut mo, mut itf) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (step, h) in plan.steps.iter().zip(heads) {
        act.push(tape.cross_entropy(h.action, &step.action_mask, step.action));
        match &step.target {
            TargetSpec::Edit { object, slot, type_mask, .. } => {
                let (scores, types) = h.edit.expect("edit heads");
                let n = tape.shape(scores).0;
                let mut y = vec![T::zero(); n];
                y[*object] = T::one();
                bce.push(tape.bce_logits(scores, &y));
                ty.push(tape.cross_entropy(types, type_mask, *slot));
            }
            TargetSpec::Adding { motif, interface, interfaces } => {
                let (ml, il) = h.adding.expect("adding heads");
                mo.push(tape.cross_entropy(ml, &motif_mask, *motif));
                itf.push(tape.cross_entropy(il, &interface_mask(*interfaces), *interface));
            }
            TargetSpec::Finish => {}
        }
    }
    let action = sum_or_zero(tape, &act);
    let edit_bce = sum_or_zero(tape, &bce);
    let bond_type = sum_or_zero(tape, &ty);
    let motif = sum_or_zero(tape, &mo);
    let interface = sum_or_zero(tape, &itf);
    let total = tape.add_n(&[action, edit_bce, bond_type, motif, interface]);
    LossTerms { total, action, edit_bce, bond_type, motif, interface }
}

impl LossTerms {
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> LossValues {
        let f = |v: Var| tape.scalar(v).to_f64().unwrap();
        LossValues {
            total: f(self.total),
            action: f(self.action),
            edit_bce: f(self.edit_bce),
            bond_type: f(self.bond_type),
            motif: f(self.motif),
            interface: f(self.interface),
        }
    }
}

pub(crate) fn to_f64<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.to_f64().unwrap()).collect()
}

/// Log-probability of choosing `object` among the allowed objects, with
/// the per-object sigmoid scores normalized over the allowed set.
pub fn object_log_prob(score_logits: &[f64], allowed: &[bool], object: usize) -> f64 {
    let total: f64 = score_logits.iter().zip(allowed).filter(|(_, &a)| a).map(|(&z, _)| (-softplus(-z)).exp()).sum();
    -softplus(-score_logits[object]) - total.ln()
}

/// Exact per-step log-probabilities of a plan's target tokens.
pub fn plan_step_log_probs<T: Scalar>(
    model: &Model<T>,
    tape: &Tape<T>,
    plan: &RecordPlan<T>,
    heads: &[StepHeads],
) -> Vec<f64> {
    let motif_mask = model.decoder.motif_mask();
    plan.steps
        .iter()
        .zip(heads)
        .map(|(step, h)| {
            let act = masked_log_softmax(&to_f64(tape.value(h.action)), &step.action_mask)[step.action];
            match &step.target {
                TargetSpec::Edit { object, slot, type_mask, object_mask } => {
                    debug_assert_eq!(step.action, ACTION_EDIT);
                    let (scores, types) = h.edit.expect("edit heads");
                    let obj = object_log_prob(&to_f64(tape.value(scores)), object_mask, *object);
                    let ty = masked_log_softmax(&to_f64(tape.value(types)), type_mask)[*slot];
                    act + obj + ty
                }
                TargetSpec::Finish => {
                    debug_assert_eq!(step.action, ACTION_FINISH);
                    act
                }
                TargetSpec::Adding { motif, interface, interfaces } => {
                    debug_assert_eq!(step.action, ACTION_ADD);
                    let (ml, il) = h.adding.expect("adding heads");
                    let z = masked_log_softmax(&to_f64(tape.value(ml)), &motif_mask)[*motif];
                    let q = masked_log_softmax(&to_f64(tape.value(il)), &interface_mask(*interfaces))[*interface];
                    act + z + q
                }
            }
        })
        .collect()
}

/// Per-step log-probabilities of a complete path (target tokens without
/// the start token), computed by teacher forcing.
pub fn path_log_probs<T: Scalar>(
    model: &Model<T>,
    product: &MolGraph,
    class: Option<u8>,
    target: &[Token],
    vocab: &MotifVocab,
) -> Result<Vec<f64>, ModelError> {
    let plan = plan_path(model, "", product, class, target, vocab)?;
    let mut tape = Tape::new(&model.params);
    let heads = forward_teacher_forced(model, &mut tape, &plan, &mut Dropout::off())?;
    Ok(plan_step_log_probs(model, &tape, &plan, &heads))
}
