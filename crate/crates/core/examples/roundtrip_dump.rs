use std::path::PathBuf;

use mars_core::{load_reactions, remove_mapping_shortcut, round_trip};

fn main() {
    let path: PathBuf = std::env::args().nth(1).expect("reaction file").into();
    let report = load_reactions(&path, None).expect("readable file");
    eprintln!("loaded {} rejected {:?}", report.records.len(), report.rejected);
    let records: Vec<_> = report.records.iter().filter_map(|r| remove_mapping_shortcut(r).ok()).collect();
    let rt = round_trip(&records, None);
    eprintln!(
        "total {} built {} replayed {} |Z| {} rejected {:?}",
        rt.total, rt.built, rt.replayed, rt.vocab_size, rt.rejected
    );
    if std::env::var("SHOW_REJECTED").is_ok() {
        for r in &records {
            if let Err(e) = mars_core::derive(r) {
                println!("REJECT {}\t{}\t{}", e.kind(), r.id, r.raw_smiles);
            }
        }
    }
    for m in &rt.mismatches {
        println!("{}\t{:?}\t{:?}", m.id, m.expected, m.got);
    }
}

