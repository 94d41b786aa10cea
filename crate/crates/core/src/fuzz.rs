//! Random token streams for exercising the engine grammar.

use mars_chem::{BondType, MolGraph, ObjectKind};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::edits::{EditAction, EditState};
use crate::engine::{GraphState, Phase};
use crate::error::CoreError;
use crate::motif::MotifVocab;
use crate::path::Token;

/// Replays a full stream (starting with `Start`) and requires completion.
pub fn replay(product: &MolGraph, tokens: &[Token], vocab: &MotifVocab) -> Result<GraphState, CoreError> {
    let mut state = GraphState::new(product);
    for t in tokens {
        state.apply_mut(t, vocab)?;
    }
    if state.phase() != Phase::Done {
        return Err(CoreError::IncompletePath);
    }
    Ok(state)
}

fn candidate_states(kind: ObjectKind) -> Vec<EditState> {
    match kind {
        ObjectKind::Bond => BondType::ALL.iter().map(|&t| EditState::Bond(t)).collect(),
        ObjectKind::Atom => vec![EditState::Atom(0), EditState::Atom(1), EditState::Atom(-1)],
    }
}

/// A random stream that replays to completion on `product`, built by
/// sampling one accepted token at a time. Returns `None` when no complete
/// stream was found within the attempt budget.
pub fn random_legal_stream<R: Rng>(
    product: &MolGraph,
    vocab: &MotifVocab,
    rng: &mut R,
    max_edits: usize,
    max_tokens: usize,
) -> Option<Vec<Token>> {
    'attempt: for _ in 0..50 {
        let mut state = GraphState::new(product);
        let mut tokens = vec![Token::Start];
        state.apply_mut(&Token::Start, vocab).ok()?;
        let n_edits = rng.gen_range(1..=max_edits.max(1));
        let mut objects: Vec<usize> = (0..product.num_objects()).collect();
        objects.shuffle(rng);
        for &o in &objects {
            if state.num_edits() == n_edits {
                break;
            }
            let (kind, _) = product.resolve_object(o).ok()?;
            let mut states = candidate_states(kind);
            states.shuffle(rng);
            if let Some(s) = states.into_iter().find(|&s| state.edit_allowed(&EditAction { object: o, state: s })) {
                let t = Token::Edit(EditAction { object: o, state: s });
                state.apply_mut(&t, vocab).ok()?;
                tokens.push(t);
            }
        }
        if state.num_edits() == 0 || state.apply_mut(&Token::FinishEdit, vocab).is_err() {
            continue;
        }
        tokens.push(Token::FinishEdit);
        while state.phase() != Phase::Done {
            if tokens.len() >= max_tokens {
                continue 'attempt;
            }
            let head = state.next_attachment()?;
            let mut options: Vec<(usize, usize)> = (0..vocab.len())
                .flat_map(|z| (0..vocab.motifs[z].num_interfaces()).map(move |q| (z, q)))
                .collect();
            options.shuffle(rng);
            let mut advanced = false;
            for (z, q) in options {
                let t = Token::AddingMotif { attachment: head, motif: z, interface: q };
                if let Ok(next) = state.apply(&t, vocab) {
                    state = next;
                    tokens.push(t);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                continue 'attempt;
            }
        }
        return Some(tokens);
    }
    None
}

/// Grammar-breaking mutations of a complete legal stream. Every returned
/// stream must be rejected by [`replay`].
pub fn illegal_variants(legal: &[Token], product: &MolGraph, vocab: &MotifVocab) -> Vec<(&'static str, Vec<Token>)> {
    let finish = legal.iter().position(|t| *t == Token::FinishEdit).expect("legal stream has FinishEdit");
    let edits: Vec<Token> = legal[1..finish].to_vec();
    let adding: Vec<Token> = legal[finish + 1..].to_vec();
    let mut out: Vec<(&'static str, Vec<Token>)> = Vec::new();
    out.push(("missing Start", legal[1..].to_vec()));
    let mut v = legal.to_vec();
    v.insert(1, Token::Start);
    out.push(("second Start", v));
    let mut v = legal.to_vec();
    v.remove(finish);
    out.push(("missing FinishEdit", v));
    let mut v = legal.to_vec();
    v.insert(finish, Token::FinishEdit);
    out.push(("second FinishEdit", v));
    let mut v = vec![Token::Start, Token::FinishEdit];
    v.extend_from_slice(&adding);
    out.push(("no edits", v));
    let mut v = legal.to_vec();
    v.insert(finish + 1, edits[0]);
    out.push(("Edit after FinishEdit", v));
    let mut v = legal.to_vec();
    v.insert(finish, adding[0]);
    out.push(("AddingMotif before FinishEdit", v));
    let mut v = legal.to_vec();
    v.insert(finish, edits[0]);
    out.push(("object edited twice", v));
    out.push(("truncated", legal[..legal.len() - 1].to_vec()));
    let mut v = legal.to_vec();
    v.push(*adding.last().expect("at least one motif"));
    out.push(("token after completion", v));
    if let Token::AddingMotif { attachment, motif, interface } = adding[0] {
        let mut v = legal.to_vec();
        v[finish + 1] = Token::AddingMotif { attachment: attachment + 1, motif, interface };
        out.push(("wrong attachment", v));
        let mut v = legal.to_vec();
        v[finish + 1] = Token::AddingMotif { attachment, motif: vocab.len(), interface };
        out.push(("unknown motif", v));
        let mut v = legal.to_vec();
        v[finish + 1] = Token::AddingMotif { attachment, motif, interface: vocab.motifs[motif].num_interfaces() };
        out.push(("interface out of range", v));
    }
    let mut v = legal.to_vec();
    v.insert(1, Token::Edit(EditAction { object: product.num_objects(), state: EditState::Atom(0) }));
    out.push(("object out of range", v));
    if let Some(b) = (0..product.num_bonds()).find(|&b| {
        GraphState::new(product).current_bond_type(b).is_some() && !edits.iter().any(|t| matches!(t, Token::Edit(e) if e.object == b))
    }) {
        let t = GraphState::new(product).current_bond_type(b).expect("non-aromatic");
        let mut v = legal.to_vec();
        v.insert(1, Token::Edit(EditAction { object: b, state: EditState::Bond(t) }));
        out.push(("no-op bond edit", v));
    }
    let mut v = legal.to_vec();
    v.insert(1, Token::Edit(EditAction { object: product.num_bonds(), state: EditState::Bond(BondType::Single) }));
    out.push(("state kind mismatch", v));
    out
}
