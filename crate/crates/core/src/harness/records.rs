//! Measurement rows and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Header of every record file, in column order.
pub const HEADER: [&str; 8] = [
    "env",
    "algorithm",
    "p",
    "C",
    "n_simulations",
    "seed",
    "metric",
    "value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    RootAbsError,
    DiscountedReturn,
    ConcentrationFreq,
    Slope,
    /// Winning exploration constant of a grid search; `value` holds the C.
    BestC,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RootAbsError => "root_abs_error",
            Metric::DiscountedReturn => "discounted_return",
            Metric::ConcentrationFreq => "concentration_freq",
            Metric::Slope => "slope",
            Metric::BestC => "best_c",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "root_abs_error" => Metric::RootAbsError,
            "discounted_return" => Metric::DiscountedReturn,
            "concentration_freq" => Metric::ConcentrationFreq,
            "slope" => Metric::Slope,
            "best_c" => Metric::BestC,
            other => return Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub env: String,
    pub algorithm: String,
    pub p: f64,
    pub c: f64,
    pub n_simulations: u64,
    pub seed: u64,
    pub metric: Metric,
    pub value: f64,
}

/// Writes the header and every record. Floats use Rust's shortest
/// round-trip formatting, so reading the file back is lossless.
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.env.clone(),
            r.algorithm.clone(),
            r.p.to_string(),
            r.c.to_string(),
            r.n_simulations.to_string(),
            r.seed.to_string(),
            r.metric.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_string(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::InvalidArgument(format!(
            "unexpected header {header:?}"
        )));
    }
    let field = |row: &csv::StringRecord, i: usize| row.get(i).unwrap_or_default().to_string();
    let num = |row: &csv::StringRecord, i: usize| -> Result<f64> {
        row.get(i)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("column {}: {e}", HEADER[i])))
    };
    let int = |row: &csv::StringRecord, i: usize| -> Result<u64> {
        row.get(i)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("column {}: {e}", HEADER[i])))
    };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        out.push(ExperimentRecord {
            env: field(&row, 0),
            algorithm: field(&row, 1),
            p: num(&row, 2)?,
            c: num(&row, 3)?,
            n_simulations: int(&row, 4)?,
            seed: int(&row, 5)?,
            metric: field(&row, 6).parse()?,
            value: num(&row, 7)?,
        });
    }
    Ok(out)
}
