//! Per-iteration solver logs and their CSV form.
//!
//! Every solver writes the same columns, in this order:
//!
//! ```text
//! k, j, lambda, H, f, F, grad_norm, step_norm, oracle_calls, time_s
//! ```
//!
//! Row `k` describes the iterate `x_k` (`f`, `F`, `grad_norm`, `oracle_calls`
//! spent to reach it, `time_s` elapsed when it was reached) and the step taken
//! from it (`j` rejected trials, accepted `lambda`, regularization constant
//! `H` in force, `step_norm`). The last row has no step: `j`, `lambda` and
//! `step_norm` are zero there. Floats are written with 17 significant digits.

use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 10] = [
    "k",
    "j",
    "lambda",
    "H",
    "f",
    "F",
    "grad_norm",
    "step_norm",
    "oracle_calls",
    "time_s",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub j: usize,
    pub lambda: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub f: f64,
    #[serde(rename = "F")]
    pub objective: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub oracle_calls: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Converged,
    BudgetExhausted,
    Error(String),
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub solver: String,
    pub records: Vec<TraceRecord>,
    pub status: Status,
    /// Last iterate.
    pub x: DVector<f64>,
    /// Oracle calls spent before the first iteration (initial constant search).
    pub setup_oracle_calls: usize,
}

impl Trace {
    pub fn new(solver: impl Into<String>, x0: DVector<f64>) -> Self {
        Self {
            solver: solver.into(),
            records: Vec::new(),
            status: Status::Running,
            x: x0,
            setup_oracle_calls: 0,
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Number of completed steps.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn oracle_calls(&self) -> usize {
        self.last().map_or(0, |r| r.oracle_calls)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    /// Oracle calls (including setup) until `grad_norm ≤ target` was first
    /// observed, if ever.
    pub fn calls_to_reach(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.grad_norm <= target)
            .map(|r| r.oracle_calls + self.setup_oracle_calls)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                r.k, r.j, r.lambda, r.h, r.f, r.objective, r.grad_norm, r.step_norm, r.oracle_calls, r.time_s
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Parses a trace CSV and checks it against the schema: exact header, one
/// row per iteration numbered from zero, finite `F` and `grad_norm`, and
/// strictly increasing `oracle_calls` after the first row.
pub fn validate_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::MalformedTrace(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (idx, row) in reader.deserialize::<TraceRecord>().enumerate() {
        let row = row.map_err(|e| Error::MalformedTrace(format!("row {idx}: {e}")))?;
        if row.k != idx {
            return Err(Error::MalformedTrace(format!("row {idx} has k = {}", row.k)));
        }
        if !row.objective.is_finite() || !row.grad_norm.is_finite() {
            return Err(Error::MalformedTrace(format!("row {idx} has non-finite F or grad_norm")));
        }
        if let Some(prev) = rows.last().map(|r: &TraceRecord| r.oracle_calls) {
            if row.oracle_calls <= prev {
                return Err(Error::MalformedTrace(format!("oracle_calls not increasing at row {idx}")));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedTrace("no rows".into()));
    }
    Ok(rows)
}
