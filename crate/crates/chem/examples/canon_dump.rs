use std::io::{self, BufRead, Write};

fn main() {
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.unwrap();
        match mars_chem::parse_smiles(&line) {
            Ok(g) => {
                let s = mars_chem::write_canonical_smiles_with(&g, mars_chem::WriteOptions { strip_maps: true });
                writeln!(out, "{line}\t{s}").unwrap();
            }
            Err(e) => writeln!(out, "{line}\tERR {e}").unwrap(),
        }
    }
}
