//! Consumes the discrepancy report written by the external cheminformatics
//! cross-check. The report is optional: set `MARS_ORACLE_REPORT` to its CSV.

use std::collections::BTreeSet;

use mars_chem::canonicalize;
use serde::Deserialize;

const MIN_AGREEMENT: f64 = 0.995;
/// Categories that count as agreement; every other category is a
/// disagreement.
const AGREEING: [&str; 2] = ["agree", "both_reject"];

#[derive(Debug, Deserialize)]
struct Row {
    line: usize,
    input: String,
    primary: String,
    #[allow(dead_code)]
    oracle: String,
    agree: bool,
    category: String,
}

fn parse(text: &str) -> Vec<Row> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect::<Result<_, _>>().expect("well-formed report")
}

/// Every input line appears once, the agreement flag matches the
/// category, and the primary column still matches this build.
fn check(rows: &[Row]) -> f64 {
    let lines: BTreeSet<usize> = rows.iter().map(|r| r.line).collect();
    assert_eq!(lines.len(), rows.len(), "duplicate lines");
    for r in rows {
        assert!(!r.category.is_empty(), "line {} uncategorized", r.line);
        assert_eq!(r.agree, AGREEING.contains(&r.category.as_str()), "line {}", r.line);
        if !r.primary.is_empty() {
            assert_eq!(canonicalize(&r.input).unwrap_or_default(), r.primary, "line {}", r.line);
        }
    }
    rows.iter().filter(|r| r.agree).count() as f64 / rows.len().max(1) as f64
}

#[test]
fn report_layout() {
    let rows = parse(
        "line,input,primary,oracle,agree,category\n\
         1,OCC,CCO,CCO,true,agree\n\
         2,C(C)(C)(C)(C)C,,,true,both_reject\n\
         3,c1ccccc1,c1ccccc1,C1=CC=CC=C1,false,aromaticity\n",
    );
    assert!((check(&rows) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn oracle_report_when_present() {
    let Some(path) = std::env::var_os("MARS_ORACLE_REPORT") else { return };
    let rows = parse(&std::fs::read_to_string(path).expect("report readable"));
    let agreement = check(&rows);
    assert!(agreement >= MIN_AGREEMENT, "agreement {agreement:.4} below {MIN_AGREEMENT}");
}
