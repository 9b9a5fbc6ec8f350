//! Deterministic linearly separable datasets.
//!
//! A unit-norm separator `w*` is planted, samples are drawn i.i.d. standard
//! normal, labeled by `sign⟨w*, x⟩` (ties go to +1) and pushed along
//! `y w*` until `y ⟨w*, x⟩ ≥ margin_gap`. The planted separator uses the
//! stream `SplitMix64::stream(seed', u64::MAX)` and sample `n` uses
//! `SplitMix64::stream(seed', n)`, where `seed'` is the spec seed for the
//! first round and `seed + round · 0x9E3779B97F4A7C15` for retries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certify::{l1_fourier_max_margin, l2_max_margin, SolverStatus};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::spectral::{self, cosine, dot, ComplexVec};

pub const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GenKind {
    GaussianSeparable {
        margin_gap: f64,
    },
    /// `w*` has `k_active` nonzero conjugate-symmetric frequency pairs,
    /// drawn from `0..=D/2` unless `frequencies` pins them.
    FourierSparse {
        k_active: usize,
        margin_gap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequencies: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub kind: GenKind,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { dim: 6, n: 12, seed: 0, kind: GenKind::GaussianSeparable { margin_gap: 0.3 } }
    }
}

impl GenSpec {
    pub fn margin_gap(&self) -> f64 {
        match self.kind {
            GenKind::GaussianSeparable { margin_gap } | GenKind::FourierSparse { margin_gap, .. } => margin_gap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("dim and n must be positive".into()));
        }
        if !(self.margin_gap() > 0.0) {
            return Err(Error::InvalidConfig("margin_gap must be positive".into()));
        }
        if let GenKind::FourierSparse { k_active, frequencies, .. } = &self.kind {
            let max = self.dim / 2 + 1;
            if *k_active == 0 || *k_active > max {
                return Err(Error::InvalidConfig(format!("k_active must lie in 1..={max}")));
            }
            if let Some(freqs) = frequencies {
                let mut sorted = freqs.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != freqs.len() || freqs.len() != *k_active {
                    return Err(Error::InvalidConfig("frequencies must be k_active distinct indices".into()));
                }
                if freqs.iter().any(|&f| f > self.dim / 2) {
                    return Err(Error::InvalidConfig(format!("frequencies must lie in 0..={}", self.dim / 2)));
                }
            }
        }
        Ok(())
    }
}

fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_add((round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The unit-norm planted separator for a given round.
pub fn planted_separator(spec: &GenSpec, round: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = SplitMix64::stream(round_seed(spec.seed, round), u64::MAX);
    let dim = spec.dim;
    let w = match &spec.kind {
        GenKind::GaussianSeparable { .. } => loop {
            let v = rng.normal_vec(dim, 1.0);
            if spectral::norm(&v) > 0.0 {
                break v;
            }
        },
        GenKind::FourierSparse { k_active, frequencies, .. } => {
            let freqs = match frequencies {
                Some(f) => f.clone(),
                None => {
                    // partial Fisher–Yates over 0..=D/2
                    let mut pool: Vec<usize> = (0..=dim / 2).collect();
                    for i in 0..*k_active {
                        let j = i + rng.below(pool.len() - i);
                        pool.swap(i, j);
                    }
                    pool.truncate(*k_active);
                    pool
                }
            };
            let mut hat = ComplexVec::zeros(dim);
            for f in freqs {
                let magnitude = rng.uniform(0.5, 1.5);
                let self_conjugate = f == 0 || 2 * f == dim;
                let phase = if self_conjugate {
                    if rng.next_f64() < 0.5 {
                        0.0
                    } else {
                        PI
                    }
                } else {
                    rng.uniform(0.0, 2.0 * PI)
                };
                hat.re[f] = magnitude * phase.cos();
                hat.im[f] = magnitude * phase.sin();
                let mirror = (dim - f) % dim;
                hat.re[mirror] = hat.re[f];
                hat.im[mirror] = -hat.im[f];
                if self_conjugate {
                    hat.im[f] = 0.0;
                }
            }
            spectral::idft(&hat)?
        }
    };
    let n = spectral::norm(&w);
    Ok(w.into_iter().map(|v| v / n).collect())
}

fn sample(spec: &GenSpec, round: usize, planted: &[f64]) -> Result<Dataset> {
    let gap = spec.margin_gap();
    let seed = round_seed(spec.seed, round);
    let mut xs = Vec::with_capacity(spec.n);
    let mut ys = Vec::with_capacity(spec.n);
    for n in 0..spec.n {
        let mut rng = SplitMix64::stream(seed, n as u64);
        let mut x = rng.normal_vec(spec.dim, 1.0);
        let proj = dot(&x, planted);
        let y = if proj >= 0.0 { 1.0 } else { -1.0 };
        let shortfall = gap - y * proj;
        if shortfall > 0.0 {
            for (xd, wd) in x.iter_mut().zip(planted) {
                *xd += shortfall * y * wd;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    Dataset::new(xs, ys)
}

/// Generate a dataset and verify its `ℓ2` margin is at least `margin_gap`.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    for round in 0..MAX_ROUNDS {
        let planted = planted_separator(spec, round)?;
        let data = sample(spec, round, &planted)?;
        if let Some(margin) = separability_margin(&data) {
            if margin >= spec.margin_gap() * (1.0 - 1e-9) {
                return Ok(data);
            }
        }
    }
    Err(Error::GenerationFailed(MAX_ROUNDS))
}

/// `1 / ‖w*_ℓ2‖`, or `None` when the data is not linearly separable.
pub fn separability_margin(data: &Dataset) -> Option<f64> {
    let report = l2_max_margin(data, 1e-10);
    match report.status {
        SolverStatus::Optimal => Some(1.0 / report.solution.norm()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctInstance {
    pub seed: u64,
    pub cosine_l2_l1f: f64,
    pub seeds_tried: usize,
}

/// Starting at `spec.seed`, find the first seed whose `ℓ2` and `ℓ1`-Fourier
/// max-margin solutions have cosine similarity at most `max_cosine`.
pub fn find_distinct_seed(
    spec: &GenSpec,
    max_cosine: f64,
    max_tries: usize,
) -> Result<(GenSpec, Dataset, DistinctInstance)> {
    for k in 0..max_tries {
        let candidate = GenSpec { seed: spec.seed.wrapping_add(k as u64), ..spec.clone() };
        let data = generate(&candidate)?;
        let l2 = l2_max_margin(&data, 1e-10);
        let l1 = l1_fourier_max_margin(&data, 1e-8, 1.0);
        if !l2.is_optimal() || !l1.is_optimal() {
            continue;
        }
        let cos = cosine(&l2.solution.w, &l1.solution.w);
        if cos <= max_cosine {
            let info = DistinctInstance { seed: candidate.seed, cosine_l2_l1f: cos, seeds_tried: k + 1 };
            return Ok((candidate, data, info));
        }
    }
    Err(Error::GenerationFailed(max_tries))
}
