//! Reproduction of the reference `1/(1+x)` coefficient table.

use std::fmt::Write;

use regpoly::hermite::{interpolate_hermite, HermiteOptions, HermiteProblem};
use regpoly::{parse, Precision};

use crate::error::{CliError, CliResult};
use crate::golden_table::REFERENCE;

pub const NODES: usize = 19;
pub const SPACING: f64 = 0.3;
pub const K: u32 = 3;

/// Absolute tolerance for coefficient `m`.
pub fn tolerance(m: usize) -> f64 {
    match m {
        0..=3 => 1e-12,
        4..=30 => 5e-7,
        _ => 1e-8,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenRow {
    pub index: usize,
    pub computed: f64,
    pub reference: f64,
    pub diff: f64,
    pub tolerance: f64,
}

impl GoldenRow {
    pub fn ok(&self) -> bool {
        self.diff <= self.tolerance
    }
}

pub fn nodes() -> Vec<f64> {
    (0..NODES).map(|j| SPACING * j as f64).collect()
}

pub fn compute(precision: Precision) -> CliResult<Vec<f64>> {
    let f = parse("1/(1+x1)", &["x1"]).map_err(|e| CliError::core("golden function", e))?;
    let prob = HermiteProblem::from_source(&f, nodes(), K).map_err(|e| CliError::core("golden data", e))?;
    let p = interpolate_hermite(
        &prob,
        HermiteOptions {
            precision,
            ..Default::default()
        },
    )
    .map_err(|e| CliError::core("golden interpolation", e))?;
    Ok(p.coefficients())
}

/// Compare against the table; `uniform` replaces the per-range tolerances.
pub fn rows(computed: &[f64], uniform: Option<f64>) -> Vec<GoldenRow> {
    REFERENCE
        .iter()
        .enumerate()
        .map(|(m, &r)| {
            let c = computed.get(m).copied().unwrap_or(f64::NAN);
            let diff = (c - r).abs();
            GoldenRow {
                index: m,
                computed: c,
                reference: r,
                diff: if diff.is_nan() { f64::INFINITY } else { diff },
                tolerance: uniform.unwrap_or_else(|| tolerance(m)),
            }
        })
        .collect()
}

pub fn csv(rows: &[GoldenRow]) -> String {
    let mut out = String::from("index,computed,reference,diff,tolerance,status\n");
    for r in rows {
        let status = if r.ok() { "ok" } else { "MISMATCH" };
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{status}",
            r.index, r.computed, r.reference, r.diff, r.tolerance
        )
        .expect("writing to a String");
    }
    out
}
