use std::fmt::Write as _;

use crate::canon::{canonical_ranks, RankOptions};
use crate::graph::{BondOrder, MolGraph};

use super::parse::implicit_hydrogens;

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Drop atom-map numbers from the output and from the ranking.
    pub strip_maps: bool,
}

/// Canonical SMILES of a sanitized graph. Stereo is not written.
pub fn write_canonical_smiles(g: &MolGraph) -> String {
    write_canonical_smiles_with(g, WriteOptions::default())
}

pub fn write_canonical_smiles_with(g: &MolGraph, opts: WriteOptions) -> String {
    let ranks = canonical_ranks(g, &RankOptions { use_maps: !opts.strip_maps, ..Default::default() });
    write_ranked(g, &ranks, opts).0
}

/// Writes `g` starting each component at its lowest-ranked atom and visiting
/// neighbours in rank order. Components are sorted by their text. Returns
/// the string and the atoms in output order.
pub fn write_ranked(g: &MolGraph, ranks: &[usize], opts: WriteOptions) -> (String, Vec<usize>) {
    let n = g.num_atoms();
    let mut visited = vec![false; n];
    let mut parts: Vec<(String, Vec<usize>)> = Vec::new();
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| ranks[v]);
    for start in starts {
        if visited[start] {
            continue;
        }
        parts.push(write_component(g, ranks, start, &mut visited, opts));
    }
    parts.sort();
    let text = parts.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(".");
    let order = parts.into_iter().flat_map(|p| p.1).collect();
    (text, order)
}

struct Plan {
    order: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    opens: Vec<Vec<usize>>,
    closes: Vec<Vec<usize>>,
}

fn plan(g: &MolGraph, ranks: &[usize], start: usize, visited: &mut [bool]) -> Plan {
    let n = g.num_atoms();
    let mut p = Plan {
        order: Vec::new(),
        children: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
    };
    let mut used_bond = vec![false; g.num_bonds()];
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    visited[start] = true;
    p.order.push(start);
    let sorted = |v: usize| {
        let mut nb = g.neighbors(v).to_vec();
        nb.sort_by_key(|&(u, _)| ranks[u]);
        nb
    };
    let mut nbr_cache: Vec<Option<Vec<(usize, usize)>>> = vec![None; n];
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        let nbrs = nbr_cache[v].get_or_insert_with(|| sorted(v));
        if *i >= nbrs.len() {
            stack.pop();
            continue;
        }
        let (u, b) = nbrs[*i];
        *i += 1;
        if used_bond[b] {
            continue;
        }
        used_bond[b] = true;
        if visited[u] {
            p.opens[u].push(b);
            p.closes[v].push(b);
        } else {
            visited[u] = true;
            p.order.push(u);
            p.children[v].push((u, b));
            stack.push((u, 0));
        }
    }
    p
}

fn write_component(
    g: &MolGraph,
    ranks: &[usize],
    start: usize,
    visited: &mut [bool],
    opts: WriteOptions,
) -> (String, Vec<usize>) {
    let p = plan(g, ranks, start, visited);
    let mut out = String::new();
    let mut digit_of = vec![0usize; g.num_bonds()];
    let mut in_use: Vec<bool> = vec![false; 100];
    emit(g, &p, start, None, &mut out, &mut digit_of, &mut in_use, opts);
    (out, p.order)
}

#[allow(clippy::too_many_arguments)]
fn emit(
    g: &MolGraph,
    p: &Plan,
    v: usize,
    via: Option<usize>,
    out: &mut String,
    digit_of: &mut [usize],
    in_use: &mut [bool],
    opts: WriteOptions,
) {
    if let Some(b) = via {
        out.push_str(bond_symbol(g, b));
    }
    write_atom(g, v, out, opts);
    for &b in &p.closes[v] {
        let d = digit_of[b];
        in_use[d] = false;
        write_digit(out, d);
    }
    let mut opens = p.opens[v].clone();
    opens.sort_by_key(|&b| p.order.iter().position(|&x| x == g.bond(b).other(v)));
    for b in opens {
        let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 100 open rings");
        in_use[d] = true;
        digit_of[b] = d;
        out.push_str(bond_symbol(g, b));
        write_digit(out, d);
    }
    let kids = &p.children[v];
    for (i, &(u, b)) in kids.iter().enumerate() {
        let branch = i + 1 < kids.len();
        if branch {
            out.push('(');
        }
        emit(g, p, u, Some(b), out, digit_of, in_use, opts);
        if branch {
            out.push(')');
        }
    }
}

fn write_digit(out: &mut String, d: usize) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(g: &MolGraph, b: usize) -> &'static str {
    let bond = g.bond(b);
    let both_aromatic = g.atom(bond.begin).aromatic && g.atom(bond.end).aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn write_atom(g: &MolGraph, v: usize, out: &mut String, opts: WriteOptions) {
    let a = g.atom(v);
    let symbol = a.element.symbol();
    let aromatic_symbol = a.aromatic && (a.element.is_aromatic_organic() || matches!(symbol, "Se" | "As"));
    let text = if aromatic_symbol { symbol.to_ascii_lowercase() } else { symbol.to_string() };
    let map = if opts.strip_maps { None } else { a.map_num };
    let plain = a.element.is_organic_subset()
        && a.formal_charge == 0
        && map.is_none()
        && (!a.aromatic || a.element.is_aromatic_organic())
        && implicit_hydrogens(g, v) == a.hydrogens;
    if plain {
        out.push_str(&text);
        return;
    }
    out.push('[');
    out.push_str(&text);
    match a.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    if let Some(m) = map {
        let _ = write!(out, ":{m}");
    }
    out.push(']');
}
