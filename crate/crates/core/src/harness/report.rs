//! Report rows and their CSV form.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Acceptance rule for one measured value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Below(f64),
    AtLeast(f64),
    Within { target: f64, tol: f64 },
    Range { lo: f64, hi: f64 },
    /// Informational row; always passes.
    Info,
}

impl Tolerance {
    pub fn check(self, v: f64) -> bool {
        match self {
            Tolerance::Below(b) => v < b,
            Tolerance::AtLeast(b) => v >= b,
            Tolerance::Within { target, tol } => (v - target).abs() <= tol,
            Tolerance::Range { lo, hi } => lo <= v && v <= hi,
            Tolerance::Info => true,
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Tolerance::Below(b) => write!(f, "< {}", sig9(b)),
            Tolerance::AtLeast(b) => write!(f, ">= {}", sig9(b)),
            Tolerance::Within { target, tol } => write!(f, "{} +- {}", sig9(target), sig9(tol)),
            Tolerance::Range { lo, hi } => write!(f, "[{}, {}]", sig9(lo), sig9(hi)),
            Tolerance::Info => write!(f, "info"),
        }
    }
}

/// Formats with 9 significant digits.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    #[serde(rename = "ε")]
    pub epsilon: String,
    pub t: String,
    pub metric: String,
    pub value: String,
    pub tolerance: String,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(experiment: &str, epsilon: Option<f64>, t: Option<f64>, metric: &str, value: f64, tol: Tolerance) -> Self {
        let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
        Self {
            experiment: experiment.into(),
            epsilon: opt(epsilon),
            t: opt(t),
            metric: metric.into(),
            value: sig9(value),
            tolerance: tol.to_string(),
            pass: value.is_finite() && tol.check(value),
        }
    }

    /// A row recording that a criterion could not be evaluated.
    pub fn failed(experiment: &str, epsilon: Option<f64>, t: Option<f64>, metric: &str, why: &str) -> Self {
        let mut r = Self::new(experiment, epsilon, t, metric, f64::NAN, Tolerance::Info);
        r.tolerance = format!("error: {why}");
        r.pass = false;
        r
    }
}

pub fn write_report<W: Write>(w: W, rows: &[ReportRow]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(["experiment", "ε", "t", "metric", "value", "tolerance", "pass"])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_report<R: Read>(r: R) -> csv::Result<Vec<ReportRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// `(passed, failed)` counts.
pub fn tally(rows: &[ReportRow]) -> (usize, usize) {
    let pass = rows.iter().filter(|r| r.pass).count();
    (pass, rows.len() - pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_formatting() {
        let rows = vec![
            ReportRow::new("E1", Some(0.01), Some(0.3), "residual_u0", 1.234e-9, Tolerance::Below(1e-7)),
            ReportRow::new("E4", None, None, "speed", -0.9, Tolerance::Within { target: -1.0, tol: 0.01 }),
            ReportRow::failed("E2", Some(1e-3), None, "ratio", "solver diverged"),
        ];
        let mut buf = Vec::new();
        write_report(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("experiment,ε,t,metric,value,tolerance,pass\n"));
        assert!(text.contains("E1,1.00000000e-2,3.00000000e-1,residual_u0,1.23400000e-9,< 1.00000000e-7,true"));
        assert_eq!(read_report(buf.as_slice()).unwrap(), rows);
        assert_eq!(tally(&rows), (1, 2));
    }
}
