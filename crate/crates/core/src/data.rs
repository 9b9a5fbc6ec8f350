use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dot, ComplexVec};

/// Labeled samples `(x_n, y_n)` with `y_n ∈ {-1, +1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let dim = x[0].len();
        if dim == 0 {
            return Err(Error::InvalidDataset("zero-dimensional features".into()));
        }
        for row in &x {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite feature".into()));
            }
        }
        if let Some(bad) = y.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidDataset(format!("label {bad} is not ±1")));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// `y_n x_n`.
    pub fn signed_sample(&self, n: usize) -> Vec<f64> {
        self.x[n].iter().map(|v| v * self.y[n]).collect()
    }

    /// `y_n ⟨x_n, w⟩` for every sample.
    pub fn margins(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        Ok(self.x.iter().zip(&self.y).map(|(x, y)| y * dot(x, w)).collect())
    }

    pub fn min_margin(&self, w: &[f64]) -> Result<f64> {
        Ok(self.margins(w)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Multiply every feature by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { x: self.x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect(), y: self.y.clone() }
    }

    /// DFT of every signed sample `y_n x_n`.
    pub fn signed_spectra(&self) -> Vec<ComplexVec> {
        (0..self.len()).map(|n| crate::spectral::dft(&self.signed_sample(n))).collect()
    }

    /// CSV with header `x_0,…,x_{D-1},y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|d| format!("x_{d}")).collect();
        header.push("y".into());
        out.write_record(&header)?;
        for (x, y) in self.x.iter().zip(&self.y) {
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{}", *y as i64));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        let dim = header
            .len()
            .checked_sub(1)
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::InvalidDataset("header must have at least one feature column and y".into()))?;
        if header.get(dim) != Some("y") {
            return Err(Error::InvalidDataset("last column must be y".into()));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for record in input.records() {
            let record = record?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidDataset(format!("{s:?}: {e}")));
            x.push(record.iter().take(dim).map(parse).collect::<Result<Vec<_>>>()?);
            y.push(parse(&record[dim])?);
        }
        Self::new(x, y)
    }
}
