//! Teacher-forcing plans: a path replayed once through the engine, with
//! every graph the decoder needs already featurized.

use std::collections::BTreeMap;

use mars_chem::MolGraph;
use mars_core::edits::STATE_SLOTS;
use mars_core::{GraphState, MotifVocab, Token};

use crate::decoder::{action_class, action_mask, interface_mask, object_mask, type_mask, ACTIONS};
use crate::encoder::GraphInput;
use crate::error::ModelError;
use crate::model::Model;
use crate::Scalar;

/// Where the representation of an attachment atom comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachRef {
    /// A product atom; its row in the synthon encoding.
    Root(usize),
    /// An interface atom created by a motif; its row in that motif's
    /// encoding.
    Motif { motif: usize, atom: usize },
}

/// Motif provenance of atoms appended after the product atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Origins {
    product_atoms: usize,
    appended: Vec<(usize, usize)>,
}

impl Origins {
    pub fn new(product_atoms: usize) -> Origins {
        Origins { product_atoms, appended: Vec::new() }
    }

    /// Records the atoms appended by merging interface `interface` of
    /// `motif`, mirroring the engine's append order.
    pub fn record(&mut self, motif: usize, interface: usize, vocab: &MotifVocab) {
        let m = vocab.motif(motif).expect("motif applied by the engine exists");
        let q = m.interfaces[interface];
        self.appended.extend((0..m.graph.num_atoms()).filter(|&v| v != q).map(|v| (motif, v)));
    }

    pub fn resolve(&self, atom: usize) -> AttachRef {
        if atom < self.product_atoms {
            AttachRef::Root(atom)
        } else {
            let (motif, atom) = self.appended[atom - self.product_atoms];
            AttachRef::Motif { motif, atom }
        }
    }
}

/// How the decoder input following a consumed token is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpec {
    Zero,
    /// Re-encode the current graph and add the edited object and new state.
    Edit { object: usize, slot: usize },
    /// Synthon embedding plus the next attachment; `motif` is set when the
    /// previous motif had several interfaces.
    Adding { attachment: AttachRef, motif: Option<usize> },
}

/// Input spec after `token` produced `state`.
pub fn input_spec(token: &Token, state: &GraphState, origins: &Origins, vocab: &MotifVocab) -> InputSpec {
    match token {
        Token::Start => InputSpec::Zero,
        Token::Edit(a) => InputSpec::Edit { object: a.object, slot: a.state.slot() },
        Token::FinishEdit | Token::AddingMotif { .. } => {
            let head = state.next_attachment().expect("pending attachment after a non-final token");
            let motif = match token {
                Token::AddingMotif { motif, .. } if vocab.motif(*motif).is_some_and(|m| m.num_interfaces() > 1) => {
                    Some(*motif)
                }
                _ => None,
            };
            InputSpec::Adding { attachment: origins.resolve(head), motif }
        }
    }
}

/// Supervised decision at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Edit { object: usize, slot: usize, type_mask: [bool; STATE_SLOTS], object_mask: Vec<bool> },
    Finish,
    Adding { motif: usize, interface: usize, interfaces: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan<T> {
    pub input: InputSpec,
    /// Graph to re-encode for an edit input.
    pub graph: Option<GraphInput<T>>,
    pub action_mask: [bool; ACTIONS],
    pub action: usize,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordPlan<T> {
    pub id: String,
    pub product: GraphInput<T>,
    pub synthon: Option<GraphInput<T>>,
    pub motifs: BTreeMap<usize, GraphInput<T>>,
    pub steps: Vec<StepPlan<T>>,
}

impl<T: Scalar> RecordPlan<T> {
    pub fn cast<U: Scalar>(&self) -> RecordPlan<U> {
        RecordPlan {
            id: self.id.clone(),
            product: self.product.cast(),
            synthon: self.synthon.as_ref().map(|g| g.cast()),
            motifs: self.motifs.iter().map(|(&z, g)| (z, g.cast())).collect(),
            steps: self
                .steps
                .iter()
                .map(|s| StepPlan {
                    input: s.input,
                    graph: s.graph.as_ref().map(|g| g.cast()),
                    action_mask: s.action_mask,
                    action: s.action,
                    target: s.target.clone(),
                })
                .collect(),
        }
    }
}

/// Replays `target` (without the leading start token) on `product`.
pub fn plan_path<T: Scalar>(
    model: &Model<T>,
    id: &str,
    product: &MolGraph,
    class: Option<u8>,
    target: &[Token],
    vocab: &MotifVocab,
) -> Result<RecordPlan<T>, ModelError> {
    let mut state = GraphState::new(product);
    let mut origins = Origins::new(product.num_atoms());
    let product_input = model.featurize(state.graph(), class)?;
    let mut synthon = None;
    let mut motifs = BTreeMap::new();
    let mut steps = Vec::with_capacity(target.len());
    let mut consumed = Token::Start;
    for tok in target {
        state.apply_mut(&consumed, vocab)?;
        if let Token::AddingMotif { motif, interface, .. } = consumed {
            origins.record(motif, interface, vocab);
        }
        if consumed == Token::FinishEdit {
            synthon = Some(model.featurize(state.graph(), class)?);
        }
        let input = input_spec(&consumed, &state, &origins, vocab);
        let graph = match input {
            InputSpec::Edit { .. } => Some(model.featurize(state.graph(), class)?),
            _ => None,
        };
        if let InputSpec::Adding { attachment: AttachRef::Motif { motif, .. }, .. } = input {
            if let std::collections::btree_map::Entry::Vacant(e) = motifs.entry(motif) {
                let m = vocab.motif(motif).expect("applied motif exists");
                e.insert(model.featurize(&m.graph, class)?);
            }
        }
        let mask = action_mask(&state);
        let action = action_class(tok);
        if !mask[action] {
            return Err(mars_core::CoreError::GrammarViolation(format!("{tok:?} not allowed in {:?}", state.phase())).into());
        }
        let target = match tok {
            Token::Edit(a) => TargetSpec::Edit {
                object: a.object,
                slot: a.state.slot(),
                type_mask: type_mask(&state, a.object),
                object_mask: object_mask(&state),
            },
            Token::FinishEdit => TargetSpec::Finish,
            Token::AddingMotif { motif, interface, .. } => {
                let m = vocab.motif(*motif).ok_or(mars_core::CoreError::UnknownMotif(*motif))?;
                TargetSpec::Adding { motif: *motif, interface: *interface, interfaces: m.num_interfaces() }
            }
            Token::Start => unreachable!("start is masked"),
        };
        if let TargetSpec::Adding { interface, interfaces, .. } = target {
            if !interface_mask(interfaces)[interface] {
                return Err(mars_core::CoreError::GrammarViolation(format!("interface {interface} out of range")).into());
            }
        }
        steps.push(StepPlan { input, graph, action_mask: mask, action, target });
        consumed = *tok;
    }
    state.apply_mut(&consumed, vocab)?;
    if !matches!(state.phase(), mars_core::Phase::Done) {
        return Err(mars_core::CoreError::IncompletePath.into());
    }
    Ok(RecordPlan { id: id.to_string(), product: product_input, synthon, motifs, steps })
}
