//! Replays transformation tokens on a product graph.

use std::sync::Arc;

use mars_chem::{sanitize_with, BondOrder, BondType, MolGraph, ObjectKind, SanitizeOptions};
use serde::{Deserialize, Serialize};

use crate::edits::{EditAction, EditState};
use crate::error::CoreError;
use crate::motif::MotifVocab;
use crate::path::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Waiting for the start token.
    Start,
    Editing,
    Adding,
    Done,
}

/// Value-type replay state. Atom indices below the product atom count refer
/// to product atoms; motif atoms are appended after them.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    product: Arc<MolGraph>,
    graph: MolGraph,
    phase: Phase,
    /// Attachments found so far while editing (ascending), then the queue of
    /// attachments still waiting for a motif.
    pending: Vec<usize>,
    edited: Vec<bool>,
    num_edits: usize,
}

fn grammar(msg: impl Into<String>) -> CoreError {
    CoreError::GrammarViolation(msg.into())
}

fn bond_type_of(order: BondOrder) -> Option<BondType> {
    match order {
        BondOrder::Single => Some(BondType::Single),
        BondOrder::Double => Some(BondType::Double),
        BondOrder::Triple => Some(BondType::Triple),
        BondOrder::Aromatic => None,
    }
}

/// Hydrogen estimate for an atom of an unsanitized intermediate graph.
fn estimate_hydrogens(g: &MolGraph, v: usize) -> u8 {
    let mut explicit = 0;
    let mut aromatic = 0;
    for &(_, b) in g.neighbors(v) {
        match g.bond(b).order.integer() {
            Some(o) => explicit += o,
            None => aromatic += 1,
        }
    }
    let atom = g.atom(v);
    let used = explicit + aromatic;
    let free = atom.element.target_valence(atom.formal_charge, used).map_or(0, |t| t - used);
    if aromatic > 0 {
        free.saturating_sub(1) as u8
    } else {
        free as u8
    }
}

impl GraphState {
    pub fn new(product: &MolGraph) -> GraphState {
        let mut graph = product.clone();
        graph.clear_map_numbers();
        GraphState {
            edited: vec![false; product.num_objects()],
            product: Arc::new(graph.clone()),
            graph,
            phase: Phase::Start,
            pending: Vec::new(),
            num_edits: 0,
        }
    }

    pub fn product(&self) -> &MolGraph {
        &self.product
    }

    /// The current graph, possibly disconnected.
    pub fn graph(&self) -> &MolGraph {
        &self.graph
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Attachments recorded while editing, or the motif queue afterwards.
    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn next_attachment(&self) -> Option<usize> {
        match self.phase {
            Phase::Adding => self.pending.first().copied(),
            _ => None,
        }
    }

    pub fn num_edits(&self) -> usize {
        self.num_edits
    }

    pub fn is_edited(&self, object: usize) -> bool {
        self.edited.get(object).copied().unwrap_or(false)
    }

    /// Current type of product bond `b`, `None` for aromatic bonds and
    /// `Some(BondType::None)` once removed.
    pub fn current_bond_type(&self, b: usize) -> Option<BondType> {
        let pb = self.product.bond(b);
        match self.graph.bond_between(pb.begin, pb.end) {
            None => Some(BondType::None),
            Some(cb) => bond_type_of(self.graph.bond(cb).order),
        }
    }

    /// Whether `action` would be accepted in the editing phase, without
    /// checking valences.
    pub fn edit_allowed(&self, action: &EditAction) -> bool {
        self.check_edit(action).is_ok()
    }

    fn check_edit(&self, action: &EditAction) -> Result<(ObjectKind, usize), CoreError> {
        let (kind, idx) = self
            .product
            .resolve_object(action.object)
            .map_err(|_| grammar(format!("object {} out of range", action.object)))?;
        if self.edited[action.object] {
            return Err(grammar(format!("object {} edited twice", action.object)));
        }
        match (kind, action.state) {
            (ObjectKind::Bond, EditState::Bond(t)) => {
                if self.current_bond_type(idx) == Some(t) {
                    return Err(grammar(format!("bond {idx} already has type {t:?}")));
                }
            }
            (ObjectKind::Atom, EditState::Atom(d)) => {
                if !(-1..=1).contains(&d) {
                    return Err(grammar(format!("charge delta {d}")));
                }
                let q = self.graph.atom(idx).formal_charge + d;
                if !(-2..=2).contains(&q) {
                    return Err(grammar(format!("charge {q} out of range")));
                }
            }
            _ => return Err(grammar("edit state does not match the object kind")),
        }
        Ok((kind, idx))
    }

    pub fn apply(&self, token: &Token, vocab: &MotifVocab) -> Result<GraphState, CoreError> {
        let mut next = self.clone();
        next.apply_mut(token, vocab)?;
        Ok(next)
    }

    pub fn apply_mut(&mut self, token: &Token, vocab: &MotifVocab) -> Result<(), CoreError> {
        match (self.phase, token) {
            (Phase::Start, Token::Start) => {
                self.phase = Phase::Editing;
                Ok(())
            }
            (Phase::Start, _) => Err(grammar("path must begin with Start")),
            (_, Token::Start) => Err(grammar("Start after the beginning")),
            (Phase::Editing, Token::Edit(action)) => self.edit(action),
            (Phase::Editing, Token::FinishEdit) => self.finish_edit(),
            (Phase::Editing, Token::AddingMotif { .. }) => Err(grammar("AddingMotif before FinishEdit")),
            (Phase::Adding, Token::AddingMotif { attachment, motif, interface }) => {
                self.add_motif(*attachment, *motif, *interface, vocab)
            }
            (Phase::Adding, Token::Edit(_)) => Err(grammar("Edit after FinishEdit")),
            (Phase::Adding, Token::FinishEdit) => Err(grammar("second FinishEdit")),
            (Phase::Done, _) => Err(grammar("token after completion")),
        }
    }

    fn mark_attachment(&mut self, v: usize) {
        if let Err(pos) = self.pending.binary_search(&v) {
            self.pending.insert(pos, v);
        }
    }

    fn edit(&mut self, action: &EditAction) -> Result<(), CoreError> {
        let (kind, idx) = self.check_edit(action)?;
        let touched = match (kind, action.state) {
            (ObjectKind::Bond, EditState::Bond(t)) => {
                let pb = self.product.bond(idx);
                let (u, v) = (pb.begin, pb.end);
                let cb = self.graph.bond_between(u, v).expect("unedited product bond exists");
                match t.order() {
                    None => self.graph.remove_bond(cb),
                    Some(order) => {
                        let bond = self.graph.bond_mut(cb);
                        bond.order = order;
                        bond.conjugated = false;
                    }
                }
                vec![u, v]
            }
            (ObjectKind::Atom, EditState::Atom(d)) => {
                self.graph.atom_mut(idx).formal_charge += d;
                vec![idx]
            }
            _ => unreachable!("checked"),
        };
        for v in touched {
            self.graph.atom_mut(v).hydrogens = estimate_hydrogens(&self.graph, v);
            self.mark_attachment(v);
        }
        self.edited[action.object] = true;
        self.num_edits += 1;
        Ok(())
    }

    fn finish_edit(&mut self) -> Result<(), CoreError> {
        if self.num_edits == 0 {
            return Err(grammar("FinishEdit without any edit"));
        }
        let opts = SanitizeOptions { flexible: self.pending.clone(), ..Default::default() };
        sanitize_with(&mut self.graph, &opts).map_err(CoreError::ValenceViolation)?;
        self.phase = Phase::Adding;
        Ok(())
    }

    fn add_motif(&mut self, attachment: usize, motif: usize, interface: usize, vocab: &MotifVocab) -> Result<(), CoreError> {
        let head = self.pending[0];
        if attachment != head {
            return Err(grammar(format!("attachment {attachment} is not the next pending atom {head}")));
        }
        let m = vocab.motif(motif).ok_or(CoreError::UnknownMotif(motif))?;
        let q = *m
            .interfaces
            .get(interface)
            .ok_or_else(|| grammar(format!("motif {motif} has no interface {interface}")))?;
        let (ma, sa) = (m.graph.atom(q), self.graph.atom(head));
        if ma.element != sa.element || ma.formal_charge != sa.formal_charge {
            return Err(CoreError::ElementMismatch(head));
        }
        let mut index = vec![usize::MAX; m.graph.num_atoms()];
        index[q] = head;
        for (v, atom) in m.graph.atoms().iter().enumerate() {
            if v != q {
                index[v] = self.graph.add_atom(atom.clone());
            }
        }
        for b in m.graph.bonds() {
            self.graph
                .add_bond(index[b.begin], index[b.end], b.order)
                .map_err(CoreError::ValenceViolation)?;
        }
        let new_pending: Vec<usize> =
            (0..m.interfaces.len()).filter(|&j| j != interface).map(|j| index[m.interfaces[j]]).collect();
        self.pending.splice(0..1, new_pending);
        let opts = SanitizeOptions { flexible: vec![head], ..Default::default() };
        sanitize_with(&mut self.graph, &opts).map_err(CoreError::ValenceViolation)?;
        if self.pending.is_empty() {
            self.phase = Phase::Done;
        }
        Ok(())
    }

    /// Connected components of the final graph.
    pub fn reactants(&self) -> Result<Vec<MolGraph>, CoreError> {
        if self.phase != Phase::Done {
            return Err(CoreError::IncompletePath);
        }
        self.graph
            .components()
            .into_iter()
            .map(|c| {
                let mut g = self.graph.subgraph(&c);
                sanitize_with(&mut g, &SanitizeOptions::default()).map_err(CoreError::ValenceViolation)?;
                Ok(g)
            })
            .collect()
    }
}

/// Applies `Start` followed by `target` and returns the reactants.
pub fn apply_path(product: &MolGraph, target: &[Token], vocab: &MotifVocab) -> Result<Vec<MolGraph>, CoreError> {
    let mut state = GraphState::new(product);
    state.apply_mut(&Token::Start, vocab)?;
    for t in target {
        state.apply_mut(t, vocab)?;
    }
    state.reactants()
}
