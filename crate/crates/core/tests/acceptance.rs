//! Acceptance suite: one line per check and one per criterion.
//!
//! Literal statements that are known not to hold are printed as
//! `FAIL (known-red)`; for those the test asserts that the predicted
//! discrepancy is exactly what is observed.

use confsym_core::suite::{all_checks, run_check, CheckRecord, Mode, Status};
use std::collections::BTreeMap;

/// Numeric re-run: seeded points and relative tolerance.
const NUMERIC_SEED: u64 = 2024;
const NUMERIC_POINTS: usize = 20;
const NUMERIC_TOL: f64 = 1e-8;

const CRITERIA: [(u8, &str); 8] = [
    (1, "second-order symmetry on the Di Pirro metric"),
    (2, "conformal Staeckel obstruction"),
    (3, "Minkowski reduction obstruction"),
    (4, "product geometry with K = p3^2"),
    (5, "quantization identity for Delta_Y"),
    (6, "beta coefficient table"),
    (7, "conformal transformation laws"),
    (8, "structural identities"),
];

/// Checks whose literal statement fails with an exactly predicted residual.
const KNOWN_RED: [&str; 6] = [
    "dipirro/operator-forms-hatted",
    "stackel/d-obs",
    "minkowski/d-obs",
    "transform/flat3-printed-nabla-p",
    "transform/lemma-printed-nabla-p",
    "structure/xy-coefficients",
];

fn expected(name: &str) -> Status {
    if KNOWN_RED.contains(&name) {
        return Status::Verdict("known-deviation".into());
    }
    match name {
        "dipirro/classify" => Status::Verdict("symmetry".into()),
        "stackel/classify" | "minkowski/classify" => Status::Verdict("obstructed".into()),
        _ => Status::Pass,
    }
}

fn label(r: &CheckRecord) -> &'static str {
    match &r.status {
        Status::Pass => "PASS",
        Status::Verdict(v) if v == "known-deviation" => "FAIL (known-red)",
        Status::Verdict(_) => "PASS",
        Status::Fail => "FAIL",
    }
}

#[test]
fn acceptance() {
    let checks = all_checks();
    let mut records: Vec<CheckRecord> = checks.iter().map(|c| run_check(c, Mode::Symbolic)).collect();
    records.sort_by_key(|r| (r.criterion, r.name.clone()));

    let mut by_crit: BTreeMap<u8, Vec<&CheckRecord>> = BTreeMap::new();
    let mut unexpected = Vec::new();
    for r in &records {
        println!(
            "[{}] {:<46} {:<18} {:<26} {:>6} ms",
            r.criterion,
            r.name,
            label(r),
            r.status.as_string(),
            r.wall_ms
        );
        if let Some(note) = &r.note {
            println!("      note: {note}");
        }
        if r.status != expected(&r.name) {
            println!("      residual: {}", r.residual);
            unexpected.push(r.name.clone());
        }
        by_crit.entry(r.criterion).or_default().push(r);
    }

    println!();
    for (c, title) in CRITERIA {
        let rs = by_crit.get(&c).map(|v| v.as_slice()).unwrap_or(&[]);
        assert!(!rs.is_empty(), "criterion {c} has no checks");
        let red: Vec<&str> = rs.iter().filter(|r| label(r) != "PASS").map(|r| r.name.as_str()).collect();
        let line = if red.is_empty() {
            "PASS".to_string()
        } else {
            format!("FAIL (known-red: {})", red.join(", "))
        };
        println!("criterion {c} ({title}): {line}");
    }

    assert!(unexpected.is_empty(), "unexpected status: {unexpected:?}");
}

/// Criterion 1 again in numeric mode, as a cross-check of the exact run.
#[test]
fn dipirro_numeric() {
    let mode = Mode::Numeric {
        seed: NUMERIC_SEED,
        points: NUMERIC_POINTS,
        tol: NUMERIC_TOL,
    };
    for c in all_checks().iter().filter(|c| c.criterion == 1) {
        let r = run_check(c, mode);
        println!("[1] {:<46} numeric {:<26} {:>6} ms", r.name, r.status.as_string(), r.wall_ms);
        assert_eq!(r.status, expected(c.name), "{}: {}", r.name, r.residual);
    }
}
