//! Broken power law values checked against a 60-digit reference table
//! (tests/data/bnsl_oracle.csv, produced by make_bnsl_oracle.py).

use bnsl::forms::{BnslParams, Break};

const TABLE: &str = include_str!("data/bnsl_oracle.csv");

fn rows() -> Vec<(BnslParams, f64, f64)> {
    let mut out = Vec::new();
    for line in TABLE.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 11, "{line}");
        let num = |i: usize| cells[i].parse::<f64>().unwrap();
        let mut breaks = Vec::new();
        for k in 0..2 {
            if !cells[3 + 3 * k].is_empty() {
                breaks.push(Break::new(num(3 + 3 * k), num(4 + 3 * k), num(5 + 3 * k)));
            }
        }
        let params = BnslParams::new(num(0), num(1), num(2), breaks).unwrap();
        out.push((params, num(9), num(10)));
    }
    out
}

#[test]
fn matches_extended_precision_table() {
    let rows = rows();
    assert_eq!(rows.len(), 400);
    let mut worst = 0.0f64;
    for (params, x, want) in &rows {
        let got = params.eval(*x).unwrap();
        let rel = ((got - want) / want).abs();
        worst = worst.max(rel);
        assert!(
            rel <= 1e-12,
            "{params:?} at x = {x}: got {got}, want {want}, rel {rel:e}"
        );
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn log_path_matches_table_above_asymptote() {
    for (params, x, want) in rows() {
        let excess = want - params.a;
        // skip rows where y - a is lost to cancellation in the reference
        if excess <= 1e-6 * want {
            continue;
        }
        let got = params.eval_log(x.ln()).exp();
        let rel = ((got - excess) / excess).abs();
        assert!(rel <= 1e-10, "{params:?} at x = {x}: rel {rel:e}");
    }
}

#[test]
fn table_covers_sharp_breaks_and_both_paths() {
    let rows = rows();
    let sharp = rows
        .iter()
        .filter(|(p, x, _)| p.breaks.iter().any(|b| b.f <= 1e-3 && (x / b.d).ln() / b.f > 500.0))
        .count();
    assert!(sharp >= 10, "only {sharp} rows exercise the overflow regime");
    assert!(rows.iter().any(|(p, _, _)| p.n() == 2));
    assert!(rows.iter().any(|(p, _, _)| p.a == 0.0));
}
