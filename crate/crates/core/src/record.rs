//! Reaction records: CSV/TSV ingestion and the JSONL record store.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use mars_chem::{
    parse_smiles, sanitize, write_canonical_smiles, write_canonical_smiles_with, Element, ElementSet, MolGraph,
    WriteOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::jsonl::{read_jsonl, write_jsonl, Header};

pub const RECORD_FORMAT: &str = "mars-records";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionRecord {
    pub id: String,
    pub class: Option<u8>,
    /// Single connected product; every atom carries a unique map number.
    pub product: MolGraph,
    /// One graph per reactant molecule. Only atoms that appear in the
    /// product keep their map number.
    pub reactants: Vec<MolGraph>,
    pub raw_smiles: String,
}

impl ReactionRecord {
    /// All reactants as one disconnected graph.
    pub fn reactant_union(&self) -> MolGraph {
        let mut g = MolGraph::new();
        for r in &self.reactants {
            g.append(r);
        }
        g
    }

    /// Sorted canonical SMILES of the reactants without map numbers.
    pub fn reactant_key(&self) -> Vec<String> {
        canonical_multiset(&self.reactants)
    }

    pub fn product_smiles(&self) -> String {
        write_canonical_smiles_with(&self.product, WriteOptions { strip_maps: true })
    }

    pub fn elements(&self) -> BTreeSet<Element> {
        std::iter::once(&self.product)
            .chain(&self.reactants)
            .flat_map(|g| g.atoms().iter().map(|a| a.element))
            .collect()
    }

    pub fn to_stored(&self) -> StoredRecord {
        let mut reactants: Vec<String> = self.reactants.iter().map(write_canonical_smiles).collect();
        reactants.sort();
        StoredRecord {
            id: self.id.clone(),
            class: self.class,
            product: write_canonical_smiles(&self.product),
            reactants,
            raw_smiles: self.raw_smiles.clone(),
        }
    }

    pub fn from_stored(s: &StoredRecord) -> Result<ReactionRecord, CoreError> {
        let product = order_by_maps(parse_smiles(&s.product)?);
        let reactants = s.reactants.iter().map(|r| parse_smiles(r)).collect::<Result<Vec<_>, _>>()?;
        let record = ReactionRecord {
            id: s.id.clone(),
            class: s.class,
            product,
            reactants,
            raw_smiles: s.raw_smiles.clone(),
        };
        validate_mapping(&record)?;
        Ok(record)
    }
}

/// Sorted canonical SMILES (maps stripped) of a list of molecules.
pub fn canonical_multiset(mols: &[MolGraph]) -> Vec<String> {
    let mut v: Vec<String> =
        mols.iter().map(|g| write_canonical_smiles_with(g, WriteOptions { strip_maps: true })).collect();
    v.sort();
    v
}

/// Reorders atoms so that atom `i` carries map `i + 1` when the map numbers
/// are exactly `1..=n`; returns the graph unchanged otherwise.
pub fn order_by_maps(g: MolGraph) -> MolGraph {
    let n = g.num_atoms();
    let mut perm = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for a in g.atoms() {
        match a.map_num {
            Some(m) if (1..=n as u32).contains(&m) && !seen[m as usize - 1] => {
                seen[m as usize - 1] = true;
                perm.push(m as usize - 1);
            }
            _ => return g,
        }
    }
    g.permuted(&perm)
}

/// One line of the record store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub id: String,
    pub class: Option<u8>,
    pub product: String,
    pub reactants: Vec<String>,
    pub raw_smiles: String,
}

pub fn parse_class(text: &str) -> Result<Option<u8>, CoreError> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("UNK") {
        return Ok(None);
    }
    let digits = t.trim_start_matches("<RX_").trim_end_matches('>');
    match digits.parse::<u8>() {
        Ok(c) if (1..=10).contains(&c) => Ok(Some(c)),
        _ => Err(CoreError::BadClass(t.to_string())),
    }
}

fn components_of(g: &MolGraph) -> Result<Vec<MolGraph>, CoreError> {
    g.components()
        .into_iter()
        .map(|c| {
            let mut sub = g.subgraph(&c);
            sanitize(&mut sub)?;
            Ok(sub)
        })
        .collect()
}

/// Parses one `reactants>reagents>product` reaction. Reagents are pooled with
/// the reactants; fragments left without mapped atoms are dropped.
pub fn parse_reaction(id: &str, class: Option<u8>, rxn: &str) -> Result<ReactionRecord, CoreError> {
    let parts: Vec<&str> = rxn.trim().split('>').collect();
    if parts.len() != 3 || parts[0].is_empty() || parts[2].is_empty() {
        return Err(CoreError::MalformedReaction(rxn.to_string()));
    }
    let product = parse_smiles(parts[2])?;
    let ncomp = product.components().len();
    if ncomp != 1 {
        return Err(CoreError::MultipleProducts(ncomp));
    }
    let side = if parts[1].is_empty() { parts[0].to_string() } else { format!("{}.{}", parts[0], parts[1]) };
    let mut reactant_side = parse_smiles(&side)?;

    let mut product_maps = BTreeSet::new();
    for (v, a) in product.atoms().iter().enumerate() {
        let m = a.map_num.ok_or(CoreError::UnmappedProductAtom(v))?;
        if !product_maps.insert(m) {
            return Err(CoreError::MappingInconsistent(format!("map {m} repeated in product")));
        }
    }
    let mut seen = BTreeSet::new();
    for v in 0..reactant_side.num_atoms() {
        let atom = reactant_side.atom_mut(v);
        if let Some(m) = atom.map_num {
            if !product_maps.contains(&m) {
                atom.map_num = None;
            } else if !seen.insert(m) {
                return Err(CoreError::MappingInconsistent(format!("map {m} repeated in reactants")));
            }
        }
    }
    if let Some(m) = product_maps.difference(&seen).next() {
        return Err(CoreError::MappingInconsistent(format!("product map {m} missing from reactants")));
    }
    let reactants: Vec<MolGraph> = components_of(&reactant_side)?
        .into_iter()
        .filter(|g| g.atoms().iter().any(|a| a.map_num.is_some()))
        .collect();
    Ok(ReactionRecord { id: id.to_string(), class, product, reactants, raw_smiles: rxn.trim().to_string() })
}

/// Checks the mapping invariants of a record.
pub fn validate_mapping(r: &ReactionRecord) -> Result<(), CoreError> {
    let mut product_maps = HashMap::new();
    for (v, a) in r.product.atoms().iter().enumerate() {
        let m = a.map_num.ok_or(CoreError::UnmappedProductAtom(v))?;
        if product_maps.insert(m, v).is_some() {
            return Err(CoreError::MappingInconsistent(format!("map {m} repeated in product")));
        }
    }
    let mut found = 0;
    let mut seen = BTreeSet::new();
    for g in &r.reactants {
        for a in g.atoms() {
            if let Some(m) = a.map_num {
                if !product_maps.contains_key(&m) || !seen.insert(m) {
                    return Err(CoreError::MappingInconsistent(format!("reactant map {m}")));
                }
                found += 1;
            }
        }
    }
    if found != product_maps.len() {
        return Err(CoreError::MappingInconsistent("product atom without reactant partner".into()));
    }
    Ok(())
}

/// Outcome of reading a reaction file.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<ReactionRecord>,
    /// Rejection counts keyed by error kind.
    pub rejected: BTreeMap<String, usize>,
    /// `(row id, error message)` for every rejected row.
    pub failures: Vec<(String, String)>,
    pub elements: ElementSet,
    /// Fixed split label per record id when the file has a split column.
    pub shipped_split: BTreeMap<String, String>,
}

impl LoadReport {
    fn reject(&mut self, id: &str, e: &CoreError) {
        *self.rejected.entry(e.kind().to_string()).or_default() += 1;
        self.failures.push((id.to_string(), e.to_string()));
    }

    pub fn total_rejected(&self) -> usize {
        self.rejected.values().sum()
    }
}

struct Columns {
    id: usize,
    class: usize,
    rxn: usize,
    split: Option<usize>,
}

fn find_columns(header: &csv::StringRecord) -> Columns {
    let lower: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let pos = |pred: &dyn Fn(&str) -> bool| lower.iter().position(|h| pred(h));
    Columns {
        id: pos(&|h| h == "id" || h == "reaction_id").unwrap_or(0),
        class: pos(&|h| h == "class" || h == "reaction_type" || h == "reaction_class").unwrap_or(1),
        rxn: pos(&|h| h.contains('>') || h.contains("smiles")).unwrap_or(2),
        split: pos(&|h| h == "split" || h == "set"),
    }
}

/// Loads a delimiter-separated reaction file with columns (id, class,
/// mapped reaction SMILES). Tab-separated input is detected from the header.
/// When `elements` is `None` the element set is derived from the accepted
/// records; records using elements outside the set are rejected.
pub fn load_reactions(path: &Path, elements: Option<&ElementSet>) -> Result<LoadReport, CoreError> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().ok_or_else(|| CoreError::FileFormat(format!("{}: empty file", path.display())))?;
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CoreError::FileFormat(e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(CoreError::FileFormat(format!("{}: expected at least 3 columns", path.display())));
    }
    let cols = find_columns(&header);
    let mut report = LoadReport::default();
    let mut parsed = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| CoreError::FileFormat(format!("row {}: {e}", row + 2)))?;
        let id = rec.get(cols.id).unwrap_or("").trim().to_string();
        let id = if id.is_empty() { format!("row{}", row + 2) } else { id };
        if let Some(s) = cols.split.and_then(|c| rec.get(c)) {
            report.shipped_split.insert(id.clone(), s.trim().to_ascii_lowercase());
        }
        let outcome = parse_class(rec.get(cols.class).unwrap_or(""))
            .and_then(|class| parse_reaction(&id, class, rec.get(cols.rxn).unwrap_or("")));
        match outcome {
            Ok(r) => parsed.push(r),
            Err(e) => {
                log::debug!("rejected {id}: {e}");
                report.reject(&id, &e);
            }
        }
    }
    report.elements = match elements {
        Some(set) => set.clone(),
        None => {
            let mut counts: BTreeMap<Element, usize> = BTreeMap::new();
            for r in &parsed {
                for e in r.elements() {
                    *counts.entry(e).or_default() += 1;
                }
            }
            ElementSet::from_counts(&counts.into_iter().collect::<Vec<_>>())
        }
    };
    for r in parsed {
        match r.elements().into_iter().find(|e| !report.elements.contains(*e)) {
            Some(e) => {
                let err = CoreError::UnsupportedElement(e.symbol().to_string());
                report.reject(&r.id, &err);
            }
            None => report.records.push(r),
        }
    }
    Ok(report)
}

pub fn write_record_store(path: &Path, records: &[ReactionRecord], elements: &ElementSet) -> Result<(), CoreError> {
    let header = Header::new(RECORD_FORMAT, RECORD_VERSION).with("elements", elements);
    let rows: Vec<StoredRecord> = records.iter().map(|r| r.to_stored()).collect();
    write_jsonl(path, &header, &rows)
}

pub fn read_record_store(path: &Path) -> Result<(Vec<ReactionRecord>, ElementSet), CoreError> {
    let (header, rows): (Header, Vec<StoredRecord>) = read_jsonl(path, RECORD_FORMAT, RECORD_VERSION)?;
    let elements: ElementSet =
        header.get("elements").ok_or_else(|| CoreError::FileFormat("record store header lacks elements".into()))?;
    let records = rows.iter().map(ReactionRecord::from_stored).collect::<Result<Vec<_>, _>>()?;
    Ok((records, elements))
}
