//! The run report: per-time empirical error with bound right-hand sides,
//! the dominance verdict, and the constant ledger. The verdict is a pure
//! function of the table, so `report` can re-render it from `errors.csv`
//! without touching anything else.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use netsa_core::analysis::ErrorSeries;

use crate::bounds::BoundsOutcome;

/// Dominance margin: the bound constrains the true expectation, so the
/// Monte-Carlo mean gets two standard errors of slack.
pub const DOMINANCE_SE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub t: u64,
    pub mean: f64,
    pub se: f64,
    pub rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub anchor_t: u64,
    pub checked: usize,
    pub dominated: usize,
    pub fraction: f64,
}

/// Fraction of comparable rows (`t ≥ anchor`, RHS present) with
/// `mean + 2·SE ≤ rhs`.
pub fn dominance_verdict(rows: &[TableRow]) -> Option<Verdict> {
    let anchor_t = rows.iter().find(|r| r.rhs.is_some())?.t;
    let mut checked = 0;
    let mut dominated = 0;
    for row in rows {
        if row.t < anchor_t {
            continue;
        }
        if let Some(rhs) = row.rhs {
            checked += 1;
            if row.mean + DOMINANCE_SE_FACTOR * row.se <= rhs {
                dominated += 1;
            }
        }
    }
    Some(Verdict {
        anchor_t,
        checked,
        dominated,
        fraction: if checked == 0 {
            0.0
        } else {
            dominated as f64 / checked as f64
        },
    })
}

pub fn build_table(series: &ErrorSeries, bounds: Option<&BoundsOutcome>) -> Vec<TableRow> {
    let rhs_map: BTreeMap<u64, f64> = bounds
        .map(|b| b.rhs_at.iter().copied().collect())
        .unwrap_or_default();
    series
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| TableRow {
            t,
            mean: series.weighted_mse[i].mean,
            se: series.weighted_mse[i].se,
            rhs: rhs_map.get(&t).copied(),
        })
        .collect()
}

pub fn report_json(
    fingerprint: &str,
    engine: &str,
    table: &[TableRow],
    bounds: Option<&BoundsOutcome>,
    warnings: &[String],
    wall_clock_s: f64,
) -> Value {
    let verdict = dominance_verdict(table);
    json!({
        "schema_version": 1,
        "fingerprint": fingerprint,
        "engine": engine,
        "wall_clock_s": wall_clock_s,
        "table": table.iter().map(|r| json!({
            "t": r.t,
            "weighted_mse_mean": r.mean,
            "weighted_mse_se": r.se,
            "bound_rhs": r.rhs,
        })).collect::<Vec<_>>(),
        "dominance": verdict.map(|v| json!({
            "anchor_t": v.anchor_t,
            "checked": v.checked,
            "dominated": v.dominated,
            "fraction": v.fraction,
            "rule": "mean + 2*SE <= RHS",
        })),
        "ledger": bounds.map(|b| b.ledger.clone()),
        "warnings": warnings,
    })
}

/// Re-render a report from a stored `errors.csv` (plus `ledger.json` when
/// present). Only the table and verdict are reconstructed; wall clock is
/// reset to zero to mark the re-render.
pub fn rerender_from_csv(dir: &Path) -> std::io::Result<Value> {
    let text = std::fs::read_to_string(dir.join("errors.csv"))?;
    let mut mse: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    let mut rhs: BTreeMap<u64, f64> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("errors.csv line {} malformed", lineno + 1),
            ));
        }
        let t: u64 = fields[0].parse().map_err(bad_data)?;
        let mean: f64 = fields[2].parse().map_err(bad_data)?;
        let se: f64 = fields[3].parse().map_err(bad_data)?;
        match fields[1] {
            "weighted_mse" => {
                mse.insert(t, (mean, se));
            }
            "bound_rhs" => {
                rhs.insert(t, mean);
            }
            _ => {}
        }
    }
    let table: Vec<TableRow> = mse
        .into_iter()
        .map(|(t, (mean, se))| TableRow {
            t,
            mean,
            se,
            rhs: rhs.get(&t).copied(),
        })
        .collect();
    let ledger: Option<Value> = std::fs::read_to_string(dir.join("ledger.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let verdict = dominance_verdict(&table);
    Ok(json!({
        "schema_version": 1,
        "rerendered": true,
        "wall_clock_s": 0.0,
        "table": table.iter().map(|r| json!({
            "t": r.t,
            "weighted_mse_mean": r.mean,
            "weighted_mse_se": r.se,
            "bound_rhs": r.rhs,
        })).collect::<Vec<_>>(),
        "dominance": verdict.map(|v| json!({
            "anchor_t": v.anchor_t,
            "checked": v.checked,
            "dominated": v.dominated,
            "fraction": v.fraction,
            "rule": "mean + 2*SE <= RHS",
        })),
        "ledger": ledger,
    }))
}

fn bad_data<E: std::fmt::Display>(e: E) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
}
