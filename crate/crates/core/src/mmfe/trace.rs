//! Per-period records of a simulated weather/forecast path and their CSV form.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub n: i64,
    pub w: f64,
    /// `F_{n+1|n}, ..., F_{n+r|n}`.
    pub forecasts: Vec<f64>,
}

pub fn csv_header(r: usize) -> String {
    let mut h = String::from("n,W_n");
    for j in 1..=r {
        h.push_str(&format!(",F_{{n+{j}|n}}"));
    }
    h
}

pub fn write_path_csv<W: Write>(out: &mut W, records: &[PathRecord]) -> Result<()> {
    let r = records.first().map_or(0, |p| p.forecasts.len());
    writeln!(out, "{}", csv_header(r))?;
    for p in records {
        write!(out, "{},{:e}", p.n, p.w)?;
        for f in &p.forecasts {
            write!(out, ",{f:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
