//! Smallest set of smallest rings.

use std::collections::VecDeque;

use crate::graph::MolGraph;

/// Computes a minimum cycle basis and returns each ring as an ordered atom
/// cycle. Candidate cycles are Horton's (shortest path, edge, shortest path)
/// triples; independence is tested by Gaussian elimination over GF(2) on
/// bond incidence vectors.
pub fn find_sssr(g: &MolGraph) -> Vec<Vec<usize>> {
    let n = g.num_atoms();
    let m = g.num_bonds();
    let components = g.components();
    let nullity = m + components.len() - n;
    if nullity == 0 {
        return Vec::new();
    }

    let ring_bond = cyclic_bonds(g);
    let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for root in 0..n {
        if !g.neighbors(root).iter().any(|&(_, b)| ring_bond[b]) {
            continue;
        }
        let (dist, parent) = bfs(g, root, &ring_bond);
        for (b, bond) in g.bonds().iter().enumerate() {
            if !ring_bond[b] {
                continue;
            }
            let (x, y) = (bond.begin, bond.end);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x] == Some((y, b)) || parent[y] == Some((x, b)) {
                continue;
            }
            let px = path_to_root(&parent, x);
            let py = path_to_root(&parent, y);
            let shared = px.iter().filter(|v| py.contains(v)).count();
            if shared != 1 {
                continue;
            }
            // x -> ... -> root -> ... -> y, closed by the bond y-x
            let mut atoms = px;
            atoms.extend(py.iter().rev().skip(1));
            let mut key = atoms.clone();
            key.sort_unstable();
            if candidates.iter().any(|(k, _)| *k == key) {
                continue;
            }
            candidates.push((key, atoms));
        }
    }
    candidates.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.0.cmp(&b.0)));

    let words = m.div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for (_, atoms) in candidates {
        let mut vec = vec![0u64; words];
        for i in 0..atoms.len() {
            let b = g
                .bond_between(atoms[i], atoms[(i + 1) % atoms.len()])
                .expect("candidate cycle follows bonds");
            vec[b / 64] ^= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if vec[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (w, r) in vec.iter_mut().zip(row) {
                    *w ^= r;
                }
            }
        }
        let Some(pivot) = (0..m).find(|&b| vec[b / 64] >> (b % 64) & 1 == 1) else {
            continue;
        };
        for (_, row) in basis.iter_mut() {
            if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (w, r) in row.iter_mut().zip(&vec) {
                    *w ^= r;
                }
            }
        }
        basis.push((pivot, vec));
        rings.push(atoms);
        if rings.len() == nullity {
            break;
        }
    }
    rings
}

/// Path from `v` up to the BFS root, starting with `v`.
fn path_to_root(parent: &[Option<(usize, usize)>], v: usize) -> Vec<usize> {
    let mut path = vec![v];
    let mut cur = v;
    while let Some((p, _)) = parent[cur] {
        path.push(p);
        cur = p;
    }
    path
}

fn bfs(g: &MolGraph, root: usize, allowed: &[bool]) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = g.num_atoms();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    let mut queue = VecDeque::from([root]);
    dist[root] = 0;
    while let Some(v) = queue.pop_front() {
        let mut nbrs: Vec<(usize, usize)> = g.neighbors(v).to_vec();
        nbrs.sort_unstable();
        for (u, b) in nbrs {
            if allowed[b] && dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                parent[u] = Some((v, b));
                queue.push_back(u);
            }
        }
    }
    (dist, parent)
}

/// Bonds that lie on at least one cycle (non-bridges).
pub fn cyclic_bonds(g: &MolGraph) -> Vec<bool> {
    let n = g.num_atoms();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut bridge = vec![false; g.num_bonds()];
    let mut time = 0;
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // iterative Tarjan: (vertex, parent bond, next neighbour position)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(start, None, 0)];
        disc[start] = time;
        low[start] = time;
        time += 1;
        while let Some(&mut (v, pb, ref mut i)) = stack.last_mut() {
            if *i < g.degree(v) {
                let (u, b) = g.neighbors(v)[*i];
                *i += 1;
                if Some(b) == pb {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = time;
                    low[u] = time;
                    time += 1;
                    stack.push((u, Some(b), 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let (Some(b), Some(&(p, _, _))) = (pb, stack.last()) {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        bridge[b] = true;
                    }
                }
            }
        }
    }
    bridge.iter().map(|b| !b).collect()
}
