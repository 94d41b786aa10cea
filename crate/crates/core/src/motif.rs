//! Motifs: the reactant fragments attached to synthons, split at ring
//! junctions, with interface atoms standing for the atoms they attach to.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;

use mars_chem::{
    canonical_ranks, parse_smiles, sanitize_with, write_canonical_smiles, MolGraph, RankOptions, SanitizeOptions,
};
use serde::{Deserialize, Serialize};

use crate::edits::Alignment;
use crate::error::CoreError;
use crate::jsonl::{read_jsonl, sha256_hex, write_jsonl, Header};

/// Largest interface count the interface classifier can address.
pub const MAX_INTERFACES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Motif {
    /// Canonical SMILES with interface atoms carrying map numbers 1..=k.
    pub key: String,
    /// Graph without map numbers.
    pub graph: MolGraph,
    /// `interfaces[j]` is the atom that carried map `j + 1` in the key.
    pub interfaces: Vec<usize>,
}

impl Motif {
    pub fn from_key(key: &str) -> Result<Motif, CoreError> {
        let mut graph = parse_smiles(key)?;
        let mut mapped: Vec<(u32, usize)> =
            graph.atoms().iter().enumerate().filter_map(|(v, a)| a.map_num.map(|m| (m, v))).collect();
        mapped.sort_unstable();
        if mapped.is_empty() || mapped.iter().enumerate().any(|(j, &(m, _))| m != j as u32 + 1) {
            return Err(CoreError::FileFormat(format!("motif key {key} must map interfaces as 1..=k")));
        }
        if !graph.is_connected() {
            return Err(CoreError::FileFormat(format!("motif key {key} is disconnected")));
        }
        graph.clear_map_numbers();
        Ok(Motif { key: key.to_string(), graph, interfaces: mapped.into_iter().map(|(_, v)| v).collect() })
    }

    pub fn num_interfaces(&self) -> usize {
        self.interfaces.len()
    }
}

/// Canonical key of the fragment of `al.kekule` on `atoms` whose interface
/// atoms are `interfaces` (reactant indices, all inside `atoms`). Returns
/// the key and the slot of every interface.
fn motif_key(al: &Alignment, atoms: &[usize], interfaces: &[usize]) -> Result<(String, Vec<usize>), CoreError> {
    if interfaces.len() > MAX_INTERFACES {
        return Err(CoreError::TooManyInterfaces(interfaces.len()));
    }
    let mut g = al.kekule.subgraph(atoms);
    g.clear_map_numbers();
    let local: Vec<usize> =
        interfaces.iter().map(|i| atoms.iter().position(|a| a == i).expect("interface inside fragment")).collect();
    sanitize_with(&mut g, &SanitizeOptions { flexible: local.clone(), ..Default::default() })
        .map_err(CoreError::MotifSanitize)?;
    let mut flag = vec![0u64; g.num_atoms()];
    for &v in &local {
        flag[v] = 1;
    }
    let ranks = canonical_ranks(&g, &RankOptions { use_maps: false, extra: Some(&flag), tiebreak: None });
    let mut by_rank = local.clone();
    by_rank.sort_by_key(|&v| ranks[v]);
    for (j, &v) in by_rank.iter().enumerate() {
        g.atom_mut(v).map_num = Some(j as u32 + 1);
    }
    let slots = local.iter().map(|v| by_rank.iter().position(|x| x == v).expect("present")).collect();
    Ok((write_canonical_smiles(&g), slots))
}

/// A motif occurrence in a junction tree: attached to its parent at
/// `interface`, with a child subtree at each of its other interfaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifNode {
    pub key: String,
    /// Slot of the interface merged with the parent attachment.
    pub interface: usize,
    /// `(slot, child)` ordered by slot.
    pub children: Vec<(usize, MotifNode)>,
}

impl MotifNode {
    pub fn keys<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(&self.key);
        for (_, c) in &self.children {
            c.keys(out);
        }
    }
}

fn bfs(g: &MolGraph, starts: &[usize], allowed: &dyn Fn(usize, usize, usize) -> bool) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = starts.iter().copied().collect();
    let mut queue: VecDeque<usize> = starts.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &(u, b) in g.neighbors(v) {
            if !seen.contains(&u) && allowed(v, u, b) {
                seen.insert(u);
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Whether the reactant bond `b` between fragment atoms may be split:
/// a non-ring bond joining two ring atoms, or a ring atom and a chain atom
/// of degree above one.
fn splittable(al: &Alignment, b: usize) -> bool {
    let g = &al.reactants;
    let bond = g.bond(b);
    if bond.in_ring {
        return false;
    }
    let (x, y) = (bond.begin, bond.end);
    let (rx, ry) = (g.atom_in_ring(x), g.atom_in_ring(y));
    (rx && ry) || (rx && !ry && g.degree(y) > 1) || (ry && !rx && g.degree(x) > 1)
}

/// Builds the motif subtree rooted at reactant atom `root` covering `atoms`.
fn build_node(al: &Alignment, root: usize, atoms: &BTreeSet<usize>) -> Result<(MotifNode, usize), CoreError> {
    let g = &al.reactants;
    let cut: BTreeSet<usize> = (0..g.num_bonds())
        .filter(|&b| {
            let bond = g.bond(b);
            atoms.contains(&bond.begin)
                && atoms.contains(&bond.end)
                && bond.begin != root
                && bond.end != root
                && splittable(al, b)
        })
        .collect();
    let inside = |_: usize, u: usize, b: usize| atoms.contains(&u) && !cut.contains(&b);
    let core = bfs(g, &[root], &inside);
    let mut junctions: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &b in &cut {
        let bond = g.bond(b);
        match (core.contains(&bond.begin), core.contains(&bond.end)) {
            (true, false) => junctions.entry(bond.begin).or_default().push(bond.end),
            (false, true) => junctions.entry(bond.end).or_default().push(bond.begin),
            _ => {}
        }
    }
    for &x in junctions.keys() {
        al.check_standard_valence(x)?;
    }
    let mut interfaces = vec![root];
    interfaces.extend(junctions.keys().copied());
    let core_atoms: Vec<usize> = core.iter().copied().collect();
    let (key, slots) = motif_key(al, &core_atoms, &interfaces)?;
    let mut children = Vec::new();
    for (i, (&x, ys)) in junctions.iter().enumerate() {
        let below = |_: usize, u: usize, _: usize| atoms.contains(&u) && !core.contains(&u);
        let mut child_atoms = bfs(g, ys, &below);
        child_atoms.insert(x);
        let (child, child_slot) = build_node(al, x, &child_atoms)?;
        debug_assert_eq!(child.interface, child_slot);
        children.push((slots[i + 1], child));
    }
    children.sort_by_key(|c| c.0);
    Ok((MotifNode { key, interface: slots[0], children }, slots[0]))
}

/// One motif tree per attachment, in the order of `attachments` (product
/// atom indices). Leaving groups touching several attachments are rejected.
pub fn extract_motifs(al: &Alignment, attachments: &[usize]) -> Result<Vec<MotifNode>, CoreError> {
    let g = &al.reactants;
    let attachment_atoms: HashMap<usize, usize> =
        attachments.iter().map(|&a| (al.to_reactant[a], a)).collect();
    let outside = |_: usize, u: usize, _: usize| !al.is_synthon_atom(u);
    let mut component = vec![usize::MAX; g.num_atoms()];
    let mut groups: Vec<BTreeSet<usize>> = Vec::new();
    for v in 0..g.num_atoms() {
        if al.is_synthon_atom(v) || component[v] != usize::MAX {
            continue;
        }
        let c = bfs(g, &[v], &outside);
        for &u in &c {
            component[u] = groups.len();
        }
        groups.push(c);
    }
    let mut owner: Vec<Option<usize>> = vec![None; groups.len()];
    for (gi, group) in groups.iter().enumerate() {
        for &v in group {
            for &(u, _) in g.neighbors(v) {
                if !al.is_synthon_atom(u) {
                    continue;
                }
                if !attachment_atoms.contains_key(&u) {
                    return Err(CoreError::MappingInconsistent(format!(
                        "leaving group bonded to product atom {} outside the reaction center",
                        al.to_product[u].expect("synthon atom")
                    )));
                }
                match owner[gi] {
                    Some(o) if o != u => return Err(CoreError::CycleDetected),
                    _ => owner[gi] = Some(u),
                }
            }
        }
    }
    let mut trees = Vec::with_capacity(attachments.len());
    for &a in attachments {
        let ra = al.to_reactant[a];
        let mut atoms: BTreeSet<usize> = BTreeSet::from([ra]);
        for (gi, group) in groups.iter().enumerate() {
            if owner[gi] == Some(ra) {
                atoms.extend(group);
            }
        }
        trees.push(build_node(al, ra, &atoms)?.0);
    }
    Ok(trees)
}

pub const VOCAB_FORMAT: &str = "mars-vocab";
pub const VOCAB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: usize,
    pub canonical_key: String,
    pub frequency: usize,
}

/// Indexed motif vocabulary, sorted by descending frequency then key.
#[derive(Debug, Clone, Default)]
pub struct MotifVocab {
    pub entries: Vec<VocabEntry>,
    pub motifs: Vec<Motif>,
    index: HashMap<String, usize>,
    /// Hash of the data the vocabulary was built from.
    pub corpus_hash: String,
}

impl MotifVocab {
    pub fn from_counts(counts: &BTreeMap<String, usize>, corpus_hash: &str) -> Result<MotifVocab, CoreError> {
        let mut sorted: Vec<(&String, &usize)> = counts.iter().filter(|c| *c.1 > 0).collect();
        sorted.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let entries = sorted
            .into_iter()
            .enumerate()
            .map(|(id, (k, &f))| VocabEntry { id, canonical_key: k.clone(), frequency: f })
            .collect();
        MotifVocab::from_entries(entries, corpus_hash)
    }

    fn from_entries(entries: Vec<VocabEntry>, corpus_hash: &str) -> Result<MotifVocab, CoreError> {
        let motifs = entries.iter().map(|e| Motif::from_key(&e.canonical_key)).collect::<Result<Vec<_>, _>>()?;
        let index = entries.iter().map(|e| (e.canonical_key.clone(), e.id)).collect();
        Ok(MotifVocab { entries, motifs, index, corpus_hash: corpus_hash.to_string() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn motif(&self, id: usize) -> Option<&Motif> {
        self.motifs.get(id)
    }

    /// Hash of the ordered key list; changes whenever ids would change.
    pub fn content_hash(&self) -> String {
        let joined: Vec<&str> = self.entries.iter().map(|e| e.canonical_key.as_str()).collect();
        sha256_hex(joined.join("\n").as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        let header = Header::new(VOCAB_FORMAT, VOCAB_VERSION)
            .with("corpus_hash", &self.corpus_hash)
            .with("size", self.len());
        write_jsonl(path, &header, &self.entries)
    }

    pub fn load(path: &Path) -> Result<MotifVocab, CoreError> {
        let (header, entries): (Header, Vec<VocabEntry>) = read_jsonl(path, VOCAB_FORMAT, VOCAB_VERSION)?;
        for (i, e) in entries.iter().enumerate() {
            if e.id != i || e.frequency == 0 {
                return Err(CoreError::FileFormat(format!("vocab entry {i} has id {} and frequency {}", e.id, e.frequency)));
            }
        }
        MotifVocab::from_entries(entries, &header.get::<String>("corpus_hash").unwrap_or_default())
    }
}
