//! GRU decoder: recurrent state, the action, edit-target, bond-type, motif
//! and interface heads, and the rules that build each step's input.

use mars_chem::ObjectKind;
use mars_core::edits::STATE_SLOTS;
use mars_core::motif::MAX_INTERFACES;
use mars_core::{EditAction, EditState, GraphState, Phase, Token};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Dropout, Gru, Linear, Mlp, PairHead};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::Scalar;

/// Action classes, indexed as in [`action_class`].
pub const ACTIONS: usize = 4;
pub const ACTION_START: usize = 0;
pub const ACTION_EDIT: usize = 1;
pub const ACTION_FINISH: usize = 2;
pub const ACTION_ADD: usize = 3;

pub fn action_class(token: &Token) -> usize {
    match token {
        Token::Start => ACTION_START,
        Token::Edit(_) => ACTION_EDIT,
        Token::FinishEdit => ACTION_FINISH,
        Token::AddingMotif { .. } => ACTION_ADD,
    }
}

/// Actions the grammar allows in `state`.
pub fn action_mask(state: &GraphState) -> [bool; ACTIONS] {
    match state.phase() {
        Phase::Editing => [false, true, state.num_edits() > 0, false],
        Phase::Adding => [false, false, false, true],
        Phase::Start | Phase::Done => [false; ACTIONS],
    }
}

/// Bond-type head slots allowed for `object` in `state`.
pub fn type_mask(state: &GraphState, object: usize) -> [bool; STATE_SLOTS] {
    let mut mask = [false; STATE_SLOTS];
    let Ok((kind, _)) = state.product().resolve_object(object) else { return mask };
    for (s, m) in mask.iter_mut().enumerate() {
        if let Some(st) = EditState::from_slot(kind, s) {
            *m = state.edit_allowed(&EditAction { object, state: st });
        }
    }
    mask
}

/// Objects with at least one allowed new state.
pub fn object_mask(state: &GraphState) -> Vec<bool> {
    (0..state.product().num_objects()).map(|o| type_mask(state, o).iter().any(|&m| m)).collect()
}

pub fn object_kind(state: &GraphState, object: usize) -> ObjectKind {
    state.product().resolve_object(object).expect("object in range").0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub gru_layers: usize,
    /// Width of the learned motif embedding table.
    pub motif_embed: usize,
    pub dropout_graph: f64,
    pub dropout_target: f64,
    pub dropout_motif: f64,
    /// Feed synthon embeddings into step inputs; off reproduces the
    /// synthon-free ablation.
    pub use_synthon: bool,
    /// Longest token sequence explored at inference.
    pub max_steps: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            gru_layers: 3,
            motif_embed: 300,
            dropout_graph: 0.3,
            dropout_target: 0.3,
            dropout_motif: 0.4,
            use_synthon: true,
            max_steps: 64,
        }
    }
}

impl DecoderConfig {
    /// Same architecture with every dropout rate set to zero.
    pub fn without_dropout(&self) -> DecoderConfig {
        DecoderConfig { dropout_graph: 0.0, dropout_target: 0.0, dropout_motif: 0.0, ..self.clone() }
    }
}

/// Per-product projections of the object representations reused by every
/// edit step.
#[derive(Debug, Clone, Copy)]
pub struct ObjectContext {
    /// `σ_e(e_i)` for every object.
    pub embedded: Var,
    pub target_items: Var,
    pub type_items: Var,
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub config: DecoderConfig,
    pub dim: usize,
    /// Motif classes including the reserved id.
    pub motif_classes: usize,
    sigma_g: Linear,
    pub gru: Gru,
    act: Linear,
    target: PairHead,
    bond_type: PairHead,
    motif: Mlp,
    interface: PairHead,
    sigma_e: Linear,
    sigma_b: Linear,
    sigma_atom: Linear,
    sigma_z: Linear,
    motif_table: usize,
}

impl Decoder {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        config: &DecoderConfig,
        dim: usize,
        vocab_size: usize,
        rng: &mut R,
    ) -> Decoder {
        let d = dim;
        let layers = config.gru_layers;
        let classes = vocab_size + 1;
        let sigma_g = Linear::new(store, "dec.sigma_g", d, layers * d, true, rng);
        let gru = Gru::new(store, "dec.gru", d, layers, rng);
        let act = Linear::new(store, "dec.act", 2 * d, ACTIONS, true, rng);
        let target = PairHead::new(store, "dec.target", 2 * d, d, d, 1, config.dropout_target, rng);
        let bond_type = PairHead::new(store, "dec.type", 2 * d, d, d, STATE_SLOTS, 0.0, rng);
        let motif = Mlp::new(store, "dec.motif", 2 * d, d, classes, 2, config.dropout_motif, rng);
        let interface = PairHead::new(store, "dec.interface", 2 * d, d, d, MAX_INTERFACES, 0.0, rng);
        let sigma_e = Linear::new(store, "dec.sigma_e", d, d, true, rng);
        let sigma_b = Linear::new(store, "dec.sigma_b", STATE_SLOTS, d, true, rng);
        let sigma_atom = Linear::new(store, "dec.sigma_atom", d, d, true, rng);
        let sigma_z = Linear::new(store, "dec.sigma_z", config.motif_embed, d, true, rng);
        let bound = 1.0 / (config.motif_embed as f64).sqrt();
        let motif_table = store.uniform("dec.motif_table", classes, config.motif_embed, bound, rng);
        Decoder {
            config: config.clone(),
            dim,
            motif_classes: classes,
            sigma_g,
            gru,
            act,
            target,
            bond_type,
            motif,
            interface,
            sigma_e,
            sigma_b,
            sigma_atom,
            sigma_z,
            motif_table,
        }
    }

    /// `σ_G(h_G)` split into one initial state per GRU layer.
    pub fn init_hidden<T: Scalar>(&self, tape: &mut Tape<T>, h_g: Var, drop: &mut Dropout) -> Vec<Var> {
        let s = self.sigma_g.forward(tape, h_g);
        let s = drop.apply(tape, s, self.config.dropout_graph);
        (0..self.gru.layers()).map(|l| tape.slice_cols(s, l * self.dim, self.dim)).collect()
    }

    /// Advances the GRU; returns the new hidden states and `ψ = h_G ‖ u`.
    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, h_g: Var, input: Var, hidden: &[Var]) -> (Vec<Var>, Var) {
        let hidden = self.gru.step(tape, input, hidden);
        let u = *hidden.last().expect("at least one GRU layer");
        let psi = tape.concat_cols(&[h_g, u]);
        (hidden, psi)
    }

    pub fn object_context<T: Scalar>(&self, tape: &mut Tape<T>, objects: Var) -> ObjectContext {
        let embedded = self.sigma_e.forward(tape, objects);
        let target_items = self.target.project_items(tape, embedded);
        let type_items = self.bond_type.project_items(tape, embedded);
        ObjectContext { embedded, target_items, type_items }
    }

    pub fn action_logits<T: Scalar>(&self, tape: &mut Tape<T>, psi: Var) -> Var {
        self.act.forward(tape, psi)
    }

    /// One edit-score logit per object (`N×1`).
    pub fn target_logits<T: Scalar>(&self, tape: &mut Tape<T>, psi: Var, ctx: &ObjectContext, drop: &mut Dropout) -> Var {
        self.target.forward(tape, psi, ctx.target_items, drop)
    }

    /// Bond-type logits (`k×4`) for each of `objects`.
    pub fn type_logits<T: Scalar>(&self, tape: &mut Tape<T>, psi: Var, ctx: &ObjectContext, objects: &[usize]) -> Var {
        let items = tape.gather(ctx.type_items, objects);
        self.bond_type.forward(tape, psi, items, &mut Dropout::off())
    }

    /// Motif logits over the vocabulary plus the reserved class.
    pub fn motif_logits<T: Scalar>(&self, tape: &mut Tape<T>, psi: Var, drop: &mut Dropout) -> Var {
        self.motif.forward(tape, psi, drop)
    }

    /// `σ_z` of the given motif classes (`k×D`).
    pub fn motif_vectors<T: Scalar>(&self, tape: &mut Tape<T>, motifs: &[usize]) -> Var {
        let table = tape.param(self.motif_table);
        let rows = tape.gather(table, motifs);
        self.sigma_z.forward(tape, rows)
    }

    /// Interface-head first-layer item blocks for the given motif classes.
    pub fn interface_items<T: Scalar>(&self, tape: &mut Tape<T>, motifs: &[usize]) -> Var {
        let z = self.motif_vectors(tape, motifs);
        self.interface.project_items(tape, z)
    }

    /// Interface logits (`k×4`) given projected motif items.
    pub fn interface_logits<T: Scalar>(&self, tape: &mut Tape<T>, psi: Var, items: Var) -> Var {
        self.interface.forward(tape, psi, items, &mut Dropout::off())
    }

    fn synthon<T: Scalar>(&self, tape: &mut Tape<T>, h_syn: Var) -> Var {
        if self.config.use_synthon {
            h_syn
        } else {
            tape.zeros(1, self.dim)
        }
    }

    /// Input after an edit: `h_syn_t + σ_e(e_o) + σ_b(onehot(slot))`.
    pub fn edit_input<T: Scalar>(&self, tape: &mut Tape<T>, h_syn: Var, ctx: &ObjectContext, object: usize, slot: usize) -> Var {
        let h = self.synthon(tape, h_syn);
        let e = tape.gather(ctx.embedded, &[object]);
        let mut onehot = vec![T::zero(); STATE_SLOTS];
        onehot[slot] = T::one();
        let oh = tape.constant(1, STATE_SLOTS, onehot);
        let b = self.sigma_b.forward(tape, oh);
        tape.add_n(&[h, e, b])
    }

    /// Input before filling an attachment: `h_syn + σ_atom(a)`, plus
    /// `σ_z(z)` when the previous motif had several interfaces.
    pub fn adding_input<T: Scalar>(&self, tape: &mut Tape<T>, h_syn: Var, atom_rep: Var, motif: Option<usize>) -> Var {
        let h = self.synthon(tape, h_syn);
        let a = self.sigma_atom.forward(tape, atom_rep);
        match motif {
            Some(z) => {
                let zv = self.motif_vectors(tape, &[z]);
                tape.add_n(&[h, a, zv])
            }
            None => tape.add(h, a),
        }
    }

    /// Motif-head mask: the reserved class is never emitted.
    pub fn motif_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.motif_classes];
        m[self.motif_classes - 1] = false;
        m
    }
}

pub fn interface_mask(count: usize) -> [bool; MAX_INTERFACES] {
    let mut m = [false; MAX_INTERFACES];
    m.iter_mut().take(count).for_each(|x| *x = true);
    m
}
