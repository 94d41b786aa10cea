use std::collections::BTreeMap;

use crate::element::Element;
use crate::error::ChemError;
use crate::graph::{Atom, BondOrder, BondStereo, ChiralTag, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

struct Directional {
    bond: usize,
    from: usize,
    up: bool,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    graph: MolGraph,
    bracket: Vec<bool>,
    directional: Vec<Directional>,
}

fn syntax(position: usize, message: impl Into<String>) -> ChemError {
    ChemError::Syntax { position, message: message.into() }
}

/// Parses SMILES into an unsanitized graph: explicit hydrogens are folded
/// into their neighbours and implicit hydrogens are filled in, but no ring
/// or aromaticity perception is done.
pub fn parse_smiles_raw(text: &str) -> Result<MolGraph, ChemError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        graph: MolGraph::new(),
        bracket: Vec::new(),
        directional: Vec::new(),
    };
    p.run()?;
    p.assign_double_bond_stereo();
    p.fill_implicit_hydrogens();
    let mut graph = p.graph;
    fold_explicit_hydrogens(&mut graph);
    Ok(graph)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), ChemError> {
        if self.text.is_empty() {
            return Err(syntax(0, "empty SMILES"));
        }
        let mut prev: Option<usize> = None;
        let mut branches: Vec<Option<usize>> = Vec::new();
        let mut pending: Option<BondSym> = None;
        let mut rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(syntax(start, "branch without preceding atom"));
                    }
                    branches.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(syntax(start, "dangling bond before ')'"));
                    }
                    prev = branches.pop().ok_or_else(|| syntax(start, "unbalanced ')'"))?;
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() || self.pos + 1 == self.text.len() {
                        return Err(syntax(start, "misplaced '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(syntax(start, "unexpected bond symbol"));
                    }
                    pending = Some(match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        b'/' => BondSym::Up,
                        _ => BondSym::Down,
                    });
                    self.pos += 1;
                }
                b'$' => return Err(syntax(start, "quadruple bonds are not supported")),
                b'0'..=b'9' | b'%' => {
                    let atom = prev.ok_or_else(|| syntax(start, "ring closure without atom"))?;
                    let digit = self.ring_number()?;
                    match rings.remove(&digit) {
                        Some((other, open_sym, _)) => {
                            let sym = match (open_sym, pending) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(syntax(start, "conflicting ring-closure bonds"));
                                }
                                (a, b) => a.or(b),
                            };
                            if other == atom {
                                return Err(syntax(start, "ring closure to itself"));
                            }
                            self.bond(other, atom, sym, false)
                                .map_err(|_| syntax(start, "duplicate ring-closure bond"))?;
                        }
                        None => {
                            rings.insert(digit, (atom, pending, start));
                        }
                    }
                    pending = None;
                }
                _ => {
                    let atom = self.atom()?;
                    if let Some(p) = prev {
                        self.bond(p, atom, pending.take(), true)
                            .map_err(|_| syntax(start, "duplicate bond"))?;
                    }
                    prev = Some(atom);
                }
            }
        }
        if pending.is_some() {
            return Err(syntax(self.pos, "dangling bond at end"));
        }
        if !branches.is_empty() {
            return Err(syntax(self.pos, "unbalanced '('"));
        }
        if let Some((_, &(_, _, at))) = rings.iter().next() {
            return Err(syntax(at, "unclosed ring"));
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, ChemError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.text.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.text[self.pos] - b'0';
            self.pos += 1;
            Ok(d as u32)
        }
    }

    fn bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, chain: bool) -> Result<(), ChemError> {
        let both_aromatic = self.graph.atom(a).aromatic && self.graph.atom(b).aromatic;
        let order = match sym {
            None if both_aromatic => BondOrder::Aromatic,
            None | Some(BondSym::Single | BondSym::Up | BondSym::Down) => BondOrder::Single,
            Some(BondSym::Double) => BondOrder::Double,
            Some(BondSym::Triple) => BondOrder::Triple,
            Some(BondSym::Aromatic) => BondOrder::Aromatic,
        };
        let idx = self.graph.add_bond(a, b, order)?;
        if chain {
            if let Some(s @ (BondSym::Up | BondSym::Down)) = sym {
                self.directional.push(Directional { bond: idx, from: a, up: s == BondSym::Up });
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<usize, ChemError> {
        let start = self.pos;
        let c = self.text[self.pos];
        if c == b'[' {
            return self.bracket_atom();
        }
        if c == b'*' {
            return Err(ChemError::UnsupportedElement("*".into()));
        }
        let two = self.text.get(self.pos..self.pos + 2);
        let (symbol, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => ("Cl", false, 2),
            (b'B', Some(b"Br")) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (c, _) if c.is_ascii_uppercase() => {
                let end = if self.text.get(self.pos + 1).is_some_and(u8::is_ascii_lowercase) { 2 } else { 1 };
                let sym = String::from_utf8_lossy(&self.text[self.pos..self.pos + end]).into_owned();
                return Err(ChemError::UnsupportedElement(sym));
            }
            _ => return Err(syntax(start, format!("unexpected character {:?}", c as char))),
        };
        self.pos += len;
        let mut atom = Atom::new(Element::from_symbol(symbol).expect("organic subset is in the table"));
        atom.aromatic = aromatic;
        self.bracket.push(false);
        Ok(self.graph.add_atom(atom))
    }

    fn bracket_atom(&mut self) -> Result<usize, ChemError> {
        let open = self.pos;
        self.pos += 1;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let (element, aromatic) = self.bracket_symbol()?;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;

        if self.peek() == Some(b'@') {
            self.pos += 1;
            atom.chiral = if self.peek() == Some(b'@') {
                self.pos += 1;
                ChiralTag::Clockwise
            } else if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() && c != b'H') {
                    self.pos += 1;
                }
                ChiralTag::Other
            } else {
                ChiralTag::CounterClockwise
            };
        }
        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.hydrogens = self.number().unwrap_or(1) as u8;
        }
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let unit: i32 = if sign == b'+' { 1 } else { -1 };
            let mut charge = unit;
            if let Some(n) = self.number() {
                charge = unit * n as i32;
            } else {
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
            if !(-2..=2).contains(&charge) {
                return Err(syntax(open, format!("formal charge {charge} outside [-2, 2]")));
            }
            atom.formal_charge = charge as i8;
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            let map = self.number().ok_or_else(|| syntax(self.pos, "expected atom map number"))?;
            atom.map_num = (map > 0).then_some(map);
        }
        if self.peek() != Some(b']') {
            return Err(syntax(self.pos, "expected ']'"));
        }
        self.pos += 1;
        self.bracket.push(true);
        Ok(self.graph.add_atom(atom))
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), ChemError> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        for (sym, element) in [("se", "Se"), ("as", "As")] {
            if rest.starts_with(sym.as_bytes()) {
                self.pos += 2;
                return Ok((Element::from_symbol(element).expect("in table"), true));
            }
        }
        match rest.first() {
            Some(&c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's')) => {
                self.pos += 1;
                let upper = (c.to_ascii_uppercase() as char).to_string();
                Ok((Element::from_symbol(&upper).expect("in table"), true))
            }
            Some(c) if c.is_ascii_uppercase() => {
                if let Some(&l) = rest.get(1).filter(|l| l.is_ascii_lowercase()) {
                    let two = format!("{}{}", *c as char, l as char);
                    if let Some(e) = Element::from_symbol(&two) {
                        self.pos += 2;
                        return Ok((e, false));
                    }
                }
                let one = (*c as char).to_string();
                match Element::from_symbol(&one) {
                    Some(e) => {
                        self.pos += 1;
                        Ok((e, false))
                    }
                    None => {
                        let len = if rest.get(1).is_some_and(u8::is_ascii_lowercase) { 2 } else { 1 };
                        Err(ChemError::UnsupportedElement(String::from_utf8_lossy(&rest[..len]).into_owned()))
                    }
                }
            }
            Some(b'*') => Err(ChemError::UnsupportedElement("*".into())),
            _ => Err(syntax(start, "expected element symbol")),
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
    }

    fn fill_implicit_hydrogens(&mut self) {
        for v in 0..self.graph.num_atoms() {
            if !self.bracket[v] {
                self.graph.atom_mut(v).hydrogens = implicit_hydrogens(&self.graph, v);
            }
        }
    }

    /// Derives E/Z labels for double bonds flanked by directional bonds.
    fn assign_double_bond_stereo(&mut self) {
        let side = |d: &Directional, center: usize| if d.from == center { d.up } else { !d.up };
        for b in 0..self.graph.num_bonds() {
            let bond = self.graph.bond(b);
            if bond.order != BondOrder::Double {
                continue;
            }
            let (u, v) = (bond.begin, bond.end);
            let at = |center: usize| {
                self.directional.iter().find(|d| {
                    let db = self.graph.bond(d.bond);
                    d.bond != b && db.contains(center)
                })
            };
            if let (Some(du), Some(dv)) = (at(u), at(v)) {
                let same = side(du, u) == side(dv, v);
                self.graph.bond_mut(b).stereo = if same { BondStereo::Z } else { BondStereo::E };
            }
        }
    }
}

/// Hydrogen count implied by the SMILES rules for an unbracketed atom with
/// the current bonds of `v` in `g`.
pub fn implicit_hydrogens(g: &MolGraph, v: usize) -> u8 {
    let atom = g.atom(v);
    let (explicit, aromatic) = g.explicit_valence_lower(v);
    let used = explicit + aromatic;
    let Some(target) = atom.element.target_valence(0, used) else {
        return 0;
    };
    let free = target - used;
    if atom.aromatic && aromatic > 0 {
        free.saturating_sub(1) as u8
    } else {
        free as u8
    }
}

fn fold_explicit_hydrogens(g: &mut MolGraph) {
    let doomed: Vec<usize> = (0..g.num_atoms())
        .filter(|&v| {
            let a = g.atom(v);
            a.element == Element::H
                && a.formal_charge == 0
                && a.map_num.is_none()
                && g.degree(v) == 1
                && g.atom(g.neighbors(v)[0].0).element != Element::H
                && g.bond(g.neighbors(v)[0].1).order == BondOrder::Single
        })
        .collect();
    if doomed.is_empty() {
        return;
    }
    for &h in &doomed {
        let heavy = g.neighbors(h)[0].0;
        let hs = g.atom(h).hydrogens;
        g.atom_mut(heavy).hydrogens += 1 + hs;
    }
    g.remove_atoms(&doomed);
}
