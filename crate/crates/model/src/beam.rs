//! Beam-search decoding of transformation paths, plus greedy decoding and
//! brute-force enumeration for small instances.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use mars_chem::MolGraph;
use mars_core::record::canonical_multiset;
use mars_core::{EditAction, EditState, GraphState, MotifVocab, Phase, Token};
use serde::{Deserialize, Serialize};

use crate::decoder::{
    action_mask, interface_mask, object_kind, object_mask, type_mask, ObjectContext, ACTION_ADD, ACTION_EDIT,
    ACTION_FINISH,
};
use crate::error::ModelError;
use crate::forward::{object_log_prob, path_log_probs, to_f64};
use crate::model::Model;
use crate::nn::Dropout;
use crate::plan::{input_spec, AttachRef, InputSpec, Origins};
use crate::tape::{masked_log_softmax, Tape, Var};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub k: usize,
    /// Choices kept per hypothesis and step before global pruning.
    pub fan_out: usize,
    /// Overrides the model's step limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { k: 10, fan_out: 20, max_steps: None }
    }
}

/// One ranked reactant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub rank: usize,
    /// Canonical SMILES of each reactant, sorted, without atom maps.
    pub reactants: Vec<String>,
    pub log_prob: f64,
    pub step_log_probs: Vec<f64>,
    /// Decoded tokens, without the start token.
    pub tokens: Vec<Token>,
}

impl Prediction {
    pub fn smiles(&self) -> String {
        self.reactants.join(".")
    }
}

struct Synthon<T> {
    graph: Vec<T>,
    atoms: Vec<T>,
}

#[derive(Clone)]
struct Hyp<T> {
    tokens: Vec<Token>,
    log_prob: f64,
    step_log_probs: Vec<f64>,
    state: GraphState,
    hidden: Vec<Vec<T>>,
    input: Vec<T>,
    synthon: Option<Arc<Synthon<T>>>,
    origins: Origins,
}

struct Candidate {
    hyp: usize,
    token: Token,
    step: f64,
    total: f64,
}

/// Per-product decoding context.
struct Search<'a, T: Scalar> {
    model: &'a Model<T>,
    vocab: &'a MotifVocab,
    class: Option<u8>,
    h_g: Vec<T>,
    n_objects: usize,
    embedded: Vec<T>,
    target_items: Vec<T>,
    type_items: Vec<T>,
    interface_items: Vec<T>,
    motif_atoms: HashMap<usize, Arc<Vec<T>>>,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn new(model: &'a Model<T>, vocab: &'a MotifVocab, product: &MolGraph, class: Option<u8>) -> Result<(Self, Hyp<T>), ModelError> {
        let state0 = GraphState::new(product);
        let input = model.featurize(state0.graph(), class)?;
        let mut tape = Tape::new(&model.params);
        let enc = model.encoder.forward(&mut tape, &input, true)?;
        let ctx = model.decoder.object_context(&mut tape, enc.objects.expect("requested"));
        let hidden = model.decoder.init_hidden(&mut tape, enc.graph, &mut Dropout::off());
        let all: Vec<usize> = (0..vocab.len()).collect();
        let iface = model.decoder.interface_items(&mut tape, &all);
        let d = model.dim();
        let search = Search {
            model,
            vocab,
            class,
            h_g: tape.value(enc.graph).to_vec(),
            n_objects: input.num_objects(),
            embedded: tape.value(ctx.embedded).to_vec(),
            target_items: tape.value(ctx.target_items).to_vec(),
            type_items: tape.value(ctx.type_items).to_vec(),
            interface_items: tape.value(iface).to_vec(),
            motif_atoms: HashMap::new(),
        };
        let mut state = state0;
        state.apply_mut(&Token::Start, vocab)?;
        let root = Hyp {
            tokens: Vec::new(),
            log_prob: 0.0,
            step_log_probs: Vec::new(),
            state,
            hidden: hidden.iter().map(|&h| tape.value(h).to_vec()).collect(),
            input: vec![T::zero(); d],
            synthon: None,
            origins: Origins::new(product.num_atoms()),
        };
        Ok((search, root))
    }

    fn context(&self, tape: &mut Tape<T>) -> ObjectContext {
        let d = self.model.dim();
        let h = self.target_items.len() / self.n_objects.max(1);
        ObjectContext {
            embedded: tape.constant(self.n_objects, d, self.embedded.clone()),
            target_items: tape.constant(self.n_objects, h, self.target_items.clone()),
            type_items: tape.constant(self.n_objects, h, self.type_items.clone()),
        }
    }

    /// Advances the GRU for `hyp` and scores every grammar-legal choice.
    fn expand(&self, hyp: &Hyp<T>) -> (Vec<Vec<T>>, Vec<(Token, f64)>) {
        let dec = &self.model.decoder;
        let d = self.model.dim();
        let mut tape = Tape::new(&self.model.params);
        let h_g = tape.constant(1, d, self.h_g.clone());
        let input = tape.constant(1, d, hyp.input.clone());
        let hidden: Vec<Var> = hyp.hidden.iter().map(|h| tape.constant(1, d, h.clone())).collect();
        let (hidden, psi) = dec.step(&mut tape, h_g, input, &hidden);
        let new_hidden = hidden.iter().map(|&h| tape.value(h).to_vec()).collect();
        let state = &hyp.state;
        let mask = action_mask(state);
        let logits = dec.action_logits(&mut tape, psi);
        let act = masked_log_softmax(&to_f64(tape.value(logits)), &mask);
        let mut out = Vec::new();
        match state.phase() {
            Phase::Editing => {
                if mask[ACTION_EDIT] {
                    let ctx = self.context(&mut tape);
                    let scores = dec.target_logits(&mut tape, psi, &ctx, &mut Dropout::off());
                    let scores = to_f64(tape.value(scores));
                    let omask = object_mask(state);
                    let allowed: Vec<usize> = (0..self.n_objects).filter(|&o| omask[o]).collect();
                    if !allowed.is_empty() {
                        let types = dec.type_logits(&mut tape, psi, &ctx, &allowed);
                        let types = to_f64(tape.value(types));
                        for (a, &o) in allowed.iter().enumerate() {
                            let lo = object_log_prob(&scores, &omask, o);
                            let tmask = type_mask(state, o);
                            let lt = masked_log_softmax(&types[a * 4..(a + 1) * 4], &tmask);
                            let kind = object_kind(state, o);
                            for s in 0..4 {
                                if tmask[s] {
                                    let st = EditState::from_slot(kind, s).expect("masked slot exists");
                                    out.push((Token::Edit(EditAction { object: o, state: st }), act[ACTION_EDIT] + lo + lt[s]));
                                }
                            }
                        }
                    }
                }
                if mask[ACTION_FINISH] {
                    out.push((Token::FinishEdit, act[ACTION_FINISH]));
                }
            }
            Phase::Adding => {
                let attachment = state.next_attachment().expect("adding phase has a pending attachment");
                let ml = dec.motif_logits(&mut tape, psi, &mut Dropout::off());
                let lz = masked_log_softmax(&to_f64(tape.value(ml)), &dec.motif_mask());
                let h = self.interface_items.len() / self.vocab.len().max(1);
                let items = tape.constant(self.vocab.len(), h, self.interface_items.clone());
                let il = dec.interface_logits(&mut tape, psi, items);
                let il = to_f64(tape.value(il));
                for z in 0..self.vocab.len() {
                    let count = self.vocab.motif(z).expect("id in range").num_interfaces();
                    let lq = masked_log_softmax(&il[z * 4..(z + 1) * 4], &interface_mask(count));
                    for (q, &l) in lq.iter().enumerate().take(count) {
                        out.push((Token::AddingMotif { attachment, motif: z, interface: q }, act[ACTION_ADD] + lz[z] + l));
                    }
                }
            }
            Phase::Start | Phase::Done => {}
        }
        (new_hidden, out)
    }

    fn encode_atoms_and_graph(&self, g: &MolGraph) -> Result<(Vec<T>, Vec<T>), ModelError> {
        let input = self.model.featurize(g, self.class)?;
        let mut tape = Tape::new(&self.model.params);
        let enc = self.model.encoder.forward(&mut tape, &input, false)?;
        Ok((tape.value(enc.graph).to_vec(), tape.value(enc.atoms).to_vec()))
    }

    fn motif_atoms(&mut self, z: usize) -> Result<Arc<Vec<T>>, ModelError> {
        if let Some(a) = self.motif_atoms.get(&z) {
            return Ok(a.clone());
        }
        let m = self.vocab.motif(z).expect("applied motif exists");
        let (_, atoms) = self.encode_atoms_and_graph(&m.graph)?;
        let atoms = Arc::new(atoms);
        self.motif_atoms.insert(z, atoms.clone());
        Ok(atoms)
    }

    /// Child hypothesis after `token` produced `state`.
    fn child(&mut self, parent: &Hyp<T>, hidden: Vec<Vec<T>>, token: Token, state: GraphState, step: f64) -> Result<Hyp<T>, ModelError> {
        let d = self.model.dim();
        let dec = &self.model.decoder;
        let mut origins = parent.origins.clone();
        if let Token::AddingMotif { motif, interface, .. } = token {
            origins.record(motif, interface, self.vocab);
        }
        let mut synthon = parent.synthon.clone();
        if token == Token::FinishEdit {
            let (graph, atoms) = self.encode_atoms_and_graph(state.graph())?;
            synthon = Some(Arc::new(Synthon { graph, atoms }));
        }
        let mut tokens = parent.tokens.clone();
        tokens.push(token);
        let mut step_log_probs = parent.step_log_probs.clone();
        step_log_probs.push(step);
        let input = if state.phase() == Phase::Done {
            Vec::new()
        } else {
            match input_spec(&token, &state, &origins, self.vocab) {
                InputSpec::Zero => vec![T::zero(); d],
                InputSpec::Edit { object, slot } => {
                    let h_syn = if dec.config.use_synthon {
                        self.encode_atoms_and_graph(state.graph())?.0
                    } else {
                        vec![T::zero(); d]
                    };
                    let mut tape = Tape::new(&self.model.params);
                    let ctx = self.context(&mut tape);
                    let h = tape.constant(1, d, h_syn);
                    let v = dec.edit_input(&mut tape, h, &ctx, object, slot);
                    tape.value(v).to_vec()
                }
                InputSpec::Adding { attachment, motif } => {
                    let syn = synthon.clone().expect("adding follows the synthon");
                    let rep: Vec<T> = match attachment {
                        AttachRef::Root(a) => syn.atoms[a * d..(a + 1) * d].to_vec(),
                        AttachRef::Motif { motif, atom } => self.motif_atoms(motif)?[atom * d..(atom + 1) * d].to_vec(),
                    };
                    let mut tape = Tape::new(&self.model.params);
                    let h = tape.constant(1, d, syn.graph.clone());
                    let r = tape.constant(1, d, rep);
                    let v = dec.adding_input(&mut tape, h, r, motif);
                    tape.value(v).to_vec()
                }
            }
        };
        Ok(Hyp { tokens, log_prob: parent.log_prob + step, step_log_probs, state, hidden, input, synthon, origins })
    }
}

fn finish<T: Scalar>(hyp: &Hyp<T>) -> Option<Prediction> {
    let reactants = hyp.state.reactants().ok()?;
    Some(Prediction {
        rank: 0,
        reactants: canonical_multiset(&reactants),
        log_prob: hyp.log_prob,
        step_log_probs: hyp.step_log_probs.clone(),
        tokens: hyp.tokens.clone(),
    })
}

/// Keeps the best-scoring prediction per reactant multiset.
fn insert_best(pool: &mut BTreeMap<Vec<String>, Prediction>, p: Prediction) {
    match pool.get(&p.reactants) {
        Some(old) if old.log_prob >= p.log_prob => {}
        _ => {
            pool.insert(p.reactants.clone(), p);
        }
    }
}

/// Ranked by log-probability, ties broken by the reactant strings.
fn ranked(pool: BTreeMap<Vec<String>, Prediction>, k: usize) -> Vec<Prediction> {
    let mut out: Vec<Prediction> = pool.into_values().collect();
    out.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.reactants.cmp(&b.reactants)));
    out.truncate(k);
    for (i, p) in out.iter_mut().enumerate() {
        p.rank = i + 1;
    }
    out
}

fn kth_best(pool: &BTreeMap<Vec<String>, Prediction>, k: usize) -> Option<f64> {
    if pool.len() < k {
        return None;
    }
    let mut s: Vec<f64> = pool.values().map(|p| p.log_prob).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Some(s[k - 1])
}

/// Beam search over transformation paths for `product`.
pub fn beam_search<T: Scalar>(
    model: &Model<T>,
    vocab: &MotifVocab,
    product: &MolGraph,
    class: Option<u8>,
    cfg: &BeamConfig,
) -> Result<Vec<Prediction>, ModelError> {
    if cfg.k == 0 || cfg.fan_out == 0 {
        return Err(ModelError::Config("beam width and fan-out must be positive".into()));
    }
    let max_steps = cfg.max_steps.unwrap_or(model.config.decoder.max_steps);
    let (mut search, root) = Search::new(model, vocab, product, class)?;
    let mut live = vec![root];
    let mut pool: BTreeMap<Vec<String>, Prediction> = BTreeMap::new();
    for _ in 0..max_steps {
        if live.is_empty() {
            break;
        }
        let mut hidden = Vec::with_capacity(live.len());
        let mut cands: Vec<Candidate> = Vec::new();
        for (i, h) in live.iter().enumerate() {
            let (nh, mut choices) = search.expand(h);
            hidden.push(nh);
            choices.sort_by(|a, b| b.1.total_cmp(&a.1));
            choices.truncate(cfg.fan_out);
            cands.extend(choices.into_iter().map(|(token, step)| Candidate { hyp: i, token, step, total: h.log_prob + step }));
        }
        cands.sort_by(|a, b| b.total.total_cmp(&a.total));
        let mut next = Vec::new();
        let mut accepted = 0;
        for c in cands {
            if accepted == cfg.k {
                break;
            }
            let parent = &live[c.hyp];
            let Ok(state) = parent.state.apply(&c.token, vocab) else { continue };
            let done = state.phase() == Phase::Done;
            let child = search.child(parent, hidden[c.hyp].clone(), c.token, state, c.step)?;
            if done {
                let Some(p) = finish(&child) else { continue };
                insert_best(&mut pool, p);
            } else {
                next.push(child);
            }
            accepted += 1;
        }
        live = next;
        if let (Some(bar), Some(best)) = (kth_best(&pool, cfg.k), live.first().map(|h| h.log_prob)) {
            if best < bar {
                break;
            }
        }
    }
    if pool.is_empty() {
        return Err(ModelError::NoValidHypothesis);
    }
    Ok(ranked(pool, cfg.k))
}

/// Follows the most probable engine-valid choice at every step.
pub fn greedy_decode<T: Scalar>(
    model: &Model<T>,
    vocab: &MotifVocab,
    product: &MolGraph,
    class: Option<u8>,
) -> Result<Prediction, ModelError> {
    let max_steps = model.config.decoder.max_steps;
    let (mut search, mut hyp) = Search::new(model, vocab, product, class)?;
    for _ in 0..max_steps {
        let (hidden, mut choices) = search.expand(&hyp);
        choices.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut advanced = false;
        for (token, step) in choices {
            let Ok(state) = hyp.state.apply(&token, vocab) else { continue };
            let done = state.phase() == Phase::Done;
            let child = search.child(&hyp, hidden.clone(), token, state, step)?;
            if done {
                let Some(mut p) = finish(&child) else { continue };
                p.rank = 1;
                return Ok(p);
            }
            hyp = child;
            advanced = true;
            break;
        }
        if !advanced {
            break;
        }
    }
    Err(ModelError::NoValidHypothesis)
}

/// Every engine-valid path of at most `max_steps` tokens, scored
/// independently by teacher forcing, deduplicated and ranked. Only
/// feasible for tiny products and vocabularies.
pub fn exhaustive_search<T: Scalar>(
    model: &Model<T>,
    vocab: &MotifVocab,
    product: &MolGraph,
    class: Option<u8>,
    max_steps: usize,
) -> Result<Vec<Prediction>, ModelError> {
    let mut start = GraphState::new(product);
    start.apply_mut(&Token::Start, vocab)?;
    let mut complete: Vec<(Vec<Token>, Vec<String>)> = Vec::new();
    let mut stack: Vec<(GraphState, Vec<Token>)> = vec![(start, Vec::new())];
    while let Some((state, tokens)) = stack.pop() {
        if tokens.len() == max_steps {
            continue;
        }
        for token in legal_tokens(&state, vocab) {
            let Ok(next) = state.apply(&token, vocab) else { continue };
            let mut t = tokens.clone();
            t.push(token);
            if next.phase() == Phase::Done {
                if let Ok(r) = next.reactants() {
                    complete.push((t, canonical_multiset(&r)));
                }
            } else {
                stack.push((next, t));
            }
        }
    }
    let mut pool = BTreeMap::new();
    for (tokens, reactants) in complete {
        let steps = path_log_probs(model, product, class, &tokens, vocab)?;
        let log_prob = steps.iter().fold(0.0, |acc, &x| acc + x);
        insert_best(&mut pool, Prediction { rank: 0, reactants, log_prob, step_log_probs: steps, tokens });
    }
    if pool.is_empty() {
        return Err(ModelError::NoValidHypothesis);
    }
    let n = pool.len();
    Ok(ranked(pool, n))
}

/// Tokens the grammar allows in `state`, before valence checks.
pub fn legal_tokens(state: &GraphState, vocab: &MotifVocab) -> Vec<Token> {
    let mut out = Vec::new();
    match state.phase() {
        Phase::Editing => {
            for o in 0..state.product().num_objects() {
                let kind = object_kind(state, o);
                for (s, ok) in type_mask(state, o).into_iter().enumerate() {
                    if ok {
                        let st = EditState::from_slot(kind, s).expect("masked slot exists");
                        out.push(Token::Edit(EditAction { object: o, state: st }));
                    }
                }
            }
            if state.num_edits() > 0 {
                out.push(Token::FinishEdit);
            }
        }
        Phase::Adding => {
            let attachment = state.next_attachment().expect("pending attachment");
            for z in 0..vocab.len() {
                for q in 0..vocab.motif(z).expect("id in range").num_interfaces() {
                    out.push(Token::AddingMotif { attachment, motif: z, interface: q });
                }
            }
        }
        Phase::Start | Phase::Done => {}
    }
    out
}
