//! Unitary DFT and circular cross-correlation.
//!
//! Conventions: `x̂[d] = D^{-1/2} Σ_p x[p] ω^{pd}` with `ω = exp(-2πi/D)`, and
//! `(h ⋆ u)[d] = D^{-1/2} Σ_k u[k] h[(d + k) mod D]`. With these,
//! `dft(h ⋆ u) = dft(h) ⊙ conj(dft(u))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative imaginary mass tolerated by [`idft`].
pub const IMAG_TOL: f64 = 1e-9;

/// Complex vector stored as parallel real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVec {
    pub fn zeros(len: usize) -> Self {
        Self { re: vec![0.0; len], im: vec![0.0; len] }
    }

    pub fn ones(len: usize) -> Self {
        Self { re: vec![1.0; len], im: vec![0.0; len] }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self { re: values.to_vec(), im: vec![0.0; values.len()] }
    }

    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch { expected: re.len(), got: im.len() });
        }
        Ok(Self { re, im })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, d: usize) -> (f64, f64) {
        (self.re[d], self.im[d])
    }

    pub fn abs(&self, d: usize) -> f64 {
        self.re[d].hypot(self.im[d])
    }

    /// Phase in `[0, 2π)`.
    pub fn phase(&self, d: usize) -> f64 {
        let phi = self.im[d].atan2(self.re[d]);
        if phi < 0.0 {
            phi + 2.0 * PI
        } else {
            phi
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `Σ_d |z[d]|^p`; coordinates with modulus below `1e-14` contribute nothing.
    pub fn pow_sum(&self, p: f64) -> f64 {
        (0..self.len()).map(|d| self.abs(d)).filter(|&m| m >= 1e-14).map(|m| m.powf(p)).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        (0..self.len()).map(|d| self.abs(d)).sum()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.iter().map(|v| -v).collect() }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.len());
        for d in 0..self.len() {
            let (a, b) = self.get(d);
            let (c, e) = other.get(d);
            out.re[d] = a * c - b * e;
            out.im[d] = a * e + b * c;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { re: self.re.iter().map(|v| v * s).collect(), im: self.im.iter().map(|v| v * s).collect() }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self {
            re: self.re.iter().zip(&other.re).map(|(a, b)| a + s * b).collect(),
            im: self.im.iter().zip(&other.im).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Max modulus of the elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..self.len()).map(|d| (self.re[d] - other.re[d]).hypot(self.im[d] - other.im[d])).fold(0.0, f64::max)
    }

    /// Largest `|z[d] - conj(z[(D - d) mod D])|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|d| {
                let m = (n - d) % n;
                (self.re[d] - self.re[m]).hypot(self.im[d] + self.im[m])
            })
            .fold(0.0, f64::max)
    }
}

fn twiddle(dim: usize, k: usize) -> (f64, f64) {
    let angle = -2.0 * PI * ((k % dim) as f64) / dim as f64;
    (angle.cos(), angle.sin())
}

/// Forward unitary DFT by direct summation.
pub fn dft(v: &[f64]) -> ComplexVec {
    let n = v.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = ComplexVec::zeros(n);
    for d in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (p, &x) in v.iter().enumerate() {
            let (c, s) = twiddle(n, p * d);
            re += x * c;
            im += x * s;
        }
        out.re[d] = re * scale;
        out.im[d] = im * scale;
    }
    out
}

/// Forward unitary DFT of a complex vector.
pub fn dft_complex(z: &ComplexVec) -> ComplexVec {
    let n = z.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = ComplexVec::zeros(n);
    for d in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for p in 0..n {
            let (c, s) = twiddle(n, p * d);
            re += z.re[p] * c - z.im[p] * s;
            im += z.re[p] * s + z.im[p] * c;
        }
        out.re[d] = re * scale;
        out.im[d] = im * scale;
    }
    out
}

/// Inverse unitary DFT keeping the complex result.
pub fn idft_complex(z: &ComplexVec) -> ComplexVec {
    let n = z.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = ComplexVec::zeros(n);
    for p in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for d in 0..n {
            // conj(ω^{pd})
            let (c, s) = twiddle(n, p * d);
            re += z.re[d] * c + z.im[d] * s;
            im += z.im[d] * c - z.re[d] * s;
        }
        out.re[p] = re * scale;
        out.im[p] = im * scale;
    }
    out
}

/// Inverse unitary DFT of a conjugate-symmetric spectrum.
pub fn idft(z: &ComplexVec) -> Result<Vec<f64>> {
    let full = idft_complex(z);
    let residual = full.im.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = IMAG_TOL * z.norm();
    if residual > tol {
        return Err(Error::NotConjugateSymmetric { residual, tol });
    }
    Ok(full.re)
}

/// Circular cross-correlation `h ⋆ u` with `1/√D` scaling.
pub fn circ_cross_correlate(h: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let n = h.len();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n).map(|d| scale * u.iter().enumerate().map(|(k, uk)| uk * h[(d + k) % n]).sum::<f64>()).collect())
}

/// Adjoint of `h ↦ h ⋆ u`: `r[m] = D^{-1/2} Σ_d g[d] u[(m - d) mod D]`.
///
/// Equal to `flip(flip(g) ⋆ u)`.
pub fn circ_correlate_adjoint(g: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let n = g.len();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n).map(|m| scale * g.iter().enumerate().map(|(d, gd)| gd * u[(m + n - d) % n]).sum::<f64>()).collect())
}

/// `u↓[k] = u[D - k - 1]`.
pub fn flip(u: &[f64]) -> Vec<f64> {
    u.iter().rev().copied().collect()
}

/// Proximal map of `τ Σ_d |z[d]|`.
pub fn complex_soft_threshold(z: &ComplexVec, tau: f64) -> ComplexVec {
    let mut out = ComplexVec::zeros(z.len());
    for d in 0..z.len() {
        let m = z.abs(d);
        if m > tau && m > 0.0 {
            let k = 1.0 - tau / m;
            out.re[d] = z.re[d] * k;
            out.im[d] = z.im[d] * k;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}
