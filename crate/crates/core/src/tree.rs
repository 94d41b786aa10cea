//! Junction trees of motifs and their depth-first linearization.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::motif::{MotifNode, MotifVocab};
use crate::path::Token;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub motif: usize,
    /// Interface slot merged with the parent attachment.
    pub interface: usize,
    /// `(slot, child)` in ascending slot order.
    pub children: Vec<(usize, TreeNode)>,
}

/// The synthons form the root; each root attachment (a product atom)
/// carries one motif subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionTree {
    /// Atom count of the product, where motif atoms start being numbered.
    pub num_product_atoms: usize,
    /// `(attachment, subtree)` in ascending attachment order.
    pub roots: Vec<(usize, TreeNode)>,
}

fn resolve(node: &MotifNode, vocab: &MotifVocab) -> Result<TreeNode, CoreError> {
    let motif = vocab.id(&node.key).ok_or_else(|| CoreError::OutOfVocab(node.key.clone()))?;
    let children = node
        .children
        .iter()
        .map(|(slot, c)| Ok((*slot, resolve(c, vocab)?)))
        .collect::<Result<Vec<_>, CoreError>>()?;
    Ok(TreeNode { motif, interface: node.interface, children })
}

pub fn build_junction_tree(
    num_product_atoms: usize,
    attachments: &[usize],
    motifs: &[MotifNode],
    vocab: &MotifVocab,
) -> Result<JunctionTree, CoreError> {
    if attachments.len() != motifs.len() {
        return Err(CoreError::MappingInconsistent("one motif tree per attachment expected".into()));
    }
    let mut roots = attachments
        .iter()
        .zip(motifs)
        .map(|(&a, m)| Ok((a, resolve(m, vocab)?)))
        .collect::<Result<Vec<_>, CoreError>>()?;
    roots.sort_by_key(|r| r.0);
    Ok(JunctionTree { num_product_atoms, roots })
}

/// AddingMotif tokens in the order the engine consumes attachments: root
/// attachments ascending, each followed depth-first by the attachments its
/// motifs create, in slot order.
pub fn linearize(tree: &JunctionTree, vocab: &MotifVocab) -> Result<Vec<Token>, CoreError> {
    let mut tokens = Vec::new();
    let mut next_atom = tree.num_product_atoms;
    for (a, node) in &tree.roots {
        visit(*a, node, vocab, &mut next_atom, &mut tokens)?;
    }
    Ok(tokens)
}

fn visit(
    attachment: usize,
    node: &TreeNode,
    vocab: &MotifVocab,
    next_atom: &mut usize,
    out: &mut Vec<Token>,
) -> Result<(), CoreError> {
    out.push(Token::AddingMotif { attachment, motif: node.motif, interface: node.interface });
    let m = vocab.motif(node.motif).ok_or(CoreError::UnknownMotif(node.motif))?;
    let q = m.interfaces[node.interface];
    let mut state_index = vec![attachment; m.graph.num_atoms()];
    for (v, slot) in state_index.iter_mut().enumerate() {
        if v != q {
            *slot = *next_atom;
            *next_atom += 1;
        }
    }
    for (slot, child) in &node.children {
        visit(state_index[m.interfaces[*slot]], child, vocab, next_atom, out)?;
    }
    Ok(())
}
