//! Numeric `R_P(w) = inf { ‖u‖² : P(u) = w }` by an augmented-Lagrangian
//! penalty method with an increasing penalty schedule and random restarts.
//!
//! Restarts begin at a deliberately unbalanced feasible factorization (all of
//! `w` in the first layer, identities elsewhere) under a random unit-product
//! layer rescaling plus noise. Generic Gaussian starts are unusable at depth
//! three and up: a coordinate whose initial sign product is wrong gets stuck
//! at `u = 0`, a strict local minimum of the penalized objective.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::{self, ArchKind, Architecture, NetworkParams, Predictor};
use crate::rng::SplitMix64;
use crate::spectral;

/// Largest accepted `‖P(u) − w‖_∞`.
pub const MAX_VIOLATION: f64 = 1e-6;
const MAX_OUTER: usize = 60;
const MAX_INNER: usize = 5_000;
const RESTART_NOISE: f64 = 0.05;
const INITIAL_PENALTY: f64 = 1e3;
const MAX_PENALTY: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub value: f64,
    pub violation: f64,
    pub params: NetworkParams,
}

/// Best `‖u‖²` over `restarts` runs that reached `‖P(u) − w‖_∞ ≤ MAX_VIOLATION`.
pub fn rp_numeric_oracle(arch: &Architecture, w: &Predictor, restarts: usize, seed: u64) -> Result<f64> {
    rp_numeric_oracle_runs(arch, w, restarts, seed).map(|best| best.value)
}

pub fn rp_numeric_oracle_runs(arch: &Architecture, w: &Predictor, restarts: usize, seed: u64) -> Result<OracleRun> {
    arch.validate()?;
    if w.dim() != arch.dim() {
        return Err(Error::DimensionMismatch { expected: arch.dim(), got: w.dim() });
    }
    if w.norm() == 0.0 {
        return Err(Error::ZeroPredictor);
    }
    let start = unbalanced_factorization(arch, w)?;
    let mut best: Option<OracleRun> = None;
    let mut worst_violation: f64 = 0.0;
    for k in 0..restarts.max(1) {
        let init = if k == 0 { start.clone() } else { jitter(&start, seed.wrapping_add(k as u64)) };
        let run = augmented_lagrangian(init, &w.w)?;
        if run.violation <= MAX_VIOLATION {
            if best.as_ref().is_none_or(|b| run.value < b.value) {
                best = Some(run);
            }
        } else {
            worst_violation = worst_violation.max(run.violation);
        }
    }
    best.ok_or(Error::DidNotConverge(worst_violation))
}

/// `P(u) = w` with `u_1` carrying `w` and the remaining layers identities.
fn unbalanced_factorization(arch: &Architecture, w: &Predictor) -> Result<NetworkParams> {
    let dim = arch.dim();
    let depth = arch.depth;
    Ok(match arch.kind {
        ArchKind::FullyConnected => {
            let widths = &arch.layer_widths;
            let layers = (0..depth)
                .map(|l| {
                    let mut m = DMatrix::zeros(widths[l], widths[l + 1]);
                    if l == 0 {
                        m.column_mut(0).copy_from_slice(&w.w);
                    } else {
                        m[(0, 0)] = 1.0;
                    }
                    m
                })
                .collect();
            NetworkParams::FullyConnected(layers)
        }
        ArchKind::Diagonal => {
            let mut layers = vec![vec![1.0; dim]; depth];
            layers[0] = w.w.clone();
            NetworkParams::Diagonal(layers)
        }
        ArchKind::Convolutional => {
            // √D e_0 has unit DFT, the identity of the Fourier product
            let mut identity = vec![0.0; dim];
            identity[0] = (dim as f64).sqrt();
            let mut layers = vec![identity; depth];
            layers[0] = w.w.clone();
            NetworkParams::Convolutional(layers)
        }
    })
}

/// Rescale layer `l` by `c_l` with `Π c_l = 1`, then add Gaussian noise.
fn jitter(start: &NetworkParams, seed: u64) -> NetworkParams {
    let mut rng = SplitMix64::stream(seed, 0x0a1e);
    let depth = start.depth();
    let logs: Vec<f64> = rng.normal_vec(depth, 1.0);
    let mean = logs.iter().sum::<f64>() / depth as f64;
    let mut out = start.clone();
    for (l, g) in logs.iter().enumerate() {
        out = out.scale_layer(l, (g - mean).exp());
    }
    let scale = out.norm() / (out.flatten().len() as f64).sqrt();
    let noise = rng.normal_vec(out.flatten().len(), RESTART_NOISE * scale);
    let flat: Vec<f64> = out.flatten().iter().zip(&noise).map(|(a, b)| a + b).collect();
    out.with_flat(&flat)
}

fn residual(params: &NetworkParams, w: &[f64]) -> Result<Vec<f64>> {
    Ok(models::predictor(params)?.w.iter().zip(w).map(|(a, b)| a - b).collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `φ(u) = ‖u‖² + λᵀ r + (μ/2)‖r‖²` with `r = P(u) − w`.
fn merit(params: &NetworkParams, w: &[f64], lambda: &[f64], mu: f64) -> Result<(f64, NetworkParams)> {
    let r = residual(params, w)?;
    let value = params.norm_sq() + spectral::dot(lambda, &r) + 0.5 * mu * spectral::dot(&r, &r);
    let weight: Vec<f64> = lambda.iter().zip(&r).map(|(l, ri)| l + mu * ri).collect();
    let grad = params.scale(2.0).add_scaled(1.0, &models::grad_params(params, &weight)?);
    Ok((value, grad))
}

fn minimize_merit(
    mut params: NetworkParams,
    w: &[f64],
    lambda: &[f64],
    mu: f64,
    grad_tol: f64,
) -> Result<NetworkParams> {
    let (mut value, mut grad) = merit(&params, w, lambda, mu)?;
    let mut step = 1.0 / (2.0 + mu);
    for _ in 0..MAX_INNER {
        let g_norm = grad.norm();
        if g_norm <= grad_tol {
            break;
        }
        // Armijo backtracking from the Barzilai–Borwein trial step.
        let mut trial_step = step;
        let (next, next_value, next_grad) = loop {
            let candidate = params.add_scaled(-trial_step, &grad);
            let (v, g) = merit(&candidate, w, lambda, mu)?;
            if v <= value - 1e-4 * trial_step * g_norm * g_norm || trial_step < 1e-20 {
                break (candidate, v, g);
            }
            trial_step *= 0.5;
        };
        let s = next.add_scaled(-1.0, &params);
        let y = next_grad.add_scaled(-1.0, &grad);
        let sy = s.dot(&y);
        step = if sy > 0.0 { s.norm_sq() / sy } else { trial_step * 2.0 };
        let decrease = value - next_value;
        params = next;
        value = next_value;
        grad = next_grad;
        if decrease.abs() <= 1e-16 * (1.0 + value.abs()) && trial_step < 1e-20 {
            break;
        }
    }
    Ok(params)
}

fn augmented_lagrangian(init: NetworkParams, w: &[f64]) -> Result<OracleRun> {
    let mut params = init;
    let mut lambda = vec![0.0; w.len()];
    let mut mu = INITIAL_PENALTY;
    let mut prev_violation = f64::INFINITY;
    let target = 1e-10 * (1.0 + max_abs(w));
    let scale = 1.0 + params.norm();
    let mut grad_tol = 1e-2 * scale;
    for _ in 0..MAX_OUTER {
        params = minimize_merit(params, w, &lambda, mu, grad_tol)?;
        grad_tol = (0.1 * grad_tol).max(1e-11 * scale);
        let r = residual(&params, w)?;
        let violation = max_abs(&r);
        if violation <= target {
            break;
        }
        for (l, ri) in lambda.iter_mut().zip(&r) {
            *l += mu * ri;
        }
        if violation > 0.25 * prev_violation {
            mu = (mu * 10.0).min(MAX_PENALTY);
        }
        prev_violation = violation;
    }
    let violation = max_abs(&residual(&params, w)?);
    Ok(OracleRun { value: params.norm_sq(), violation, params })
}
