use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::AnalysisError;

/// Per-step diagnostics of a nudged run against its reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    /// `||v||_0^2 / 2`.
    pub kinetic_energy: Vec<f64>,
    /// `||v - u||_0`.
    pub l2_error: Vec<f64>,
    /// `||v - u||_1`.
    pub h1_error: Vec<f64>,
    /// First time the relative L2 error fell below `sync_threshold`.
    pub sync_time: Option<f64>,
    pub sync_threshold: f64,
    pub fingerprint: u64,
}

pub const RECORD_HEADER: &str = "t,ke,l2_err,h1_err";

impl RunRecord {
    pub fn new(sync_threshold: f64, fingerprint: u64) -> Self {
        Self { sync_threshold, fingerprint, ..Default::default() }
    }

    pub fn push(&mut self, t: f64, ke: f64, l2: f64, h1: f64) {
        self.times.push(t);
        self.kinetic_energy.push(ke);
        self.l2_error.push(l2);
        self.h1_error.push(h1);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_l2(&self) -> Option<f64> {
        self.l2_error.last().copied()
    }

    /// Checks equal lengths, nonnegative errors and strictly increasing times.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let n = self.times.len();
        if self.kinetic_energy.len() != n || self.l2_error.len() != n || self.h1_error.len() != n {
            return Err(AnalysisError::InvalidRecord("series lengths differ".into()));
        }
        if self.l2_error.iter().chain(&self.h1_error).any(|e| !(*e >= 0.0)) {
            return Err(AnalysisError::InvalidRecord("negative or non-finite error".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::InvalidRecord("time column is not strictly increasing".into()));
        }
        Ok(())
    }

    /// CSV with header `t,ke,l2_err,h1_err`; values use the shortest
    /// round-trip decimal form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(RECORD_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?}",
                self.times[i], self.kinetic_energy[i], self.l2_error[i], self.h1_error[i]
            );
        }
        w.write_all(out.as_bytes())
    }

    /// Reads the CSV written by [`RunRecord::write_csv`]; sync metadata is
    /// not part of the CSV and is left empty.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, AnalysisError> {
        let mut rec = RunRecord::default();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != RECORD_HEADER {
                    return Err(AnalysisError::Parse { line: 1, msg: format!("expected header '{RECORD_HEADER}'") });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| AnalysisError::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() != 4 {
                return Err(AnalysisError::Parse { line: i + 1, msg: format!("expected 4 fields, found {}", vals.len()) });
            }
            rec.push(vals[0], vals[1], vals[2], vals[3]);
        }
        rec.validate()?;
        Ok(rec)
    }
}
