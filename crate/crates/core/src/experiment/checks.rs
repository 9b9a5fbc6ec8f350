//! Randomized identity checks: Fourier factorization, correlation theorem,
//! Euler identity, Fourier-domain gradient descent, finite differences and
//! the `R_P` closed forms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certify::rp_numeric_oracle;
use crate::data::Dataset;
use crate::datagen::{self, GenKind, GenSpec};
use crate::error::Result;
use crate::models::{self, ArchKind, Architecture, FourierParams, NetworkParams, Predictor};
use crate::rng::SplitMix64;
use crate::spectral::{self, circ_cross_correlate, dft, idft, ComplexVec};
use crate::training::{self, exp_loss, loss_grad_w};

/// Worst value of one check over all cells, and whether it met its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckSummary {
    pub fn new(name: &str, tolerance: f64) -> Self {
        CheckSummary { name: name.to_string(), cases: 0, worst: 0.0, tolerance, passed: true }
    }

    /// Record one value; NaN counts as a failure.
    pub fn record(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
        self.passed = self.passed && value <= self.tolerance;
    }

    /// Record a hard failure (an error instead of a value).
    pub fn fail(&mut self) {
        self.record(f64::INFINITY);
    }

    fn record_result(&mut self, value: Result<f64>) {
        match value {
            Ok(v) => self.record(v),
            Err(_) => self.fail(),
        }
    }
}

fn random_conv(dim: usize, depth: usize, seed: u64) -> NetworkParams {
    let mut rng = SplitMix64::stream(seed, 0xc0);
    NetworkParams::Convolutional((0..depth).map(|_| rng.normal_vec(dim, 1.0)).collect())
}

fn random_params(arch: &Architecture, seed: u64) -> Result<NetworkParams> {
    models::init_params(arch, 1.0, seed)
}

fn check_dataset(dim: usize, n: usize, seed: u64) -> Result<Dataset> {
    datagen::generate(&GenSpec { dim, n, seed, kind: GenKind::GaussianSeparable { margin_gap: 0.1 } })
}

/// `‖dft(P_conv(u)) − ⊙_l dft(u_l)‖_∞` for Gaussian `u`.
pub fn lemma1_defect(dim: usize, depth: usize, seed: u64) -> Result<f64> {
    let params = random_conv(dim, depth, seed);
    let w_hat = models::predictor(&params)?.w_hat;
    let product = models::fourier_factorization(&params)?.predictor_hat();
    Ok(w_hat.max_abs_diff(&product))
}

/// `‖dft(h ⋆ u) − ĥ ⊙ conj(û)‖_∞` for Gaussian `h, u`.
pub fn correlation_defect(dim: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::stream(seed, 0xc1);
    let h = rng.normal_vec(dim, 1.0);
    let u = rng.normal_vec(dim, 1.0);
    let lhs = dft(&circ_cross_correlate(&h, &u)?);
    Ok(lhs.max_abs_diff(&dft(&h).hadamard(&dft(&u).conj())))
}

/// `|⟨u, ∇_u ⟨z, P(u)⟩⟩ − L ⟨z, P(u)⟩| / (‖u‖² ‖z‖ ‖P(u)‖ / ‖u‖²)`, i.e. the
/// Euler identity defect relative to its natural scale.
pub fn euler_defect(arch: &Architecture, seed: u64) -> Result<f64> {
    let params = random_params(arch, seed)?;
    let mut rng = SplitMix64::stream(seed, 0xc2);
    let z = rng.normal_vec(arch.dim(), 1.0);
    let w = models::predictor(&params)?.w;
    let grad = models::grad_params(&params, &z)?;
    let lhs = params.dot(&grad);
    let rhs = arch.depth as f64 * spectral::dot(&z, &w);
    let scale = arch.depth as f64 * spectral::norm(&z) * spectral::norm(&w);
    Ok((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE))
}

/// Run `steps` fixed-step iterations in the time domain and, independently,
/// on the complex diagonal network started from the DFT of the same
/// initialization; returns the largest elementwise gap between `dft(u_l[t])`
/// and `û_l[t]` over all layers and iterates.
pub fn fft_gd_defect(data: &Dataset, depth: usize, eta: f64, steps: usize, seed: u64) -> Result<f64> {
    let arch = Architecture::convolutional(data.dim(), depth);
    let init = models::init_params(&arch, 0.5, seed)?;
    let fourier = training::fourier_diagonal_gd(models::fourier_factorization(&init)?, data, eta, steps)?;

    let mut params = init.clone();
    let mut worst: f64 = 0.0;
    for (t, expected) in fourier.iter().enumerate() {
        worst = worst.max(fourier_gap(&params, expected)?);
        if t == steps {
            break;
        }
        let g = loss_grad_w(&models::predictor(&params)?, data)?;
        params = params.add_scaled(-eta, &models::grad_params(&params, &g)?);
    }
    // the training loop must land on the same iterate
    let config = training::TrainConfig {
        step_policy: training::StepPolicy::Fixed { eta },
        init_scale: 0.5,
        seed,
        max_iters: steps,
        direction_tol: 0.0,
        trace_stride: steps.max(1),
    };
    let (trained, _) = training::gd_train_from(init, data, &config)?;
    worst = worst.max(fourier_gap(&trained, &fourier[steps])?);
    Ok(worst)
}

fn fourier_gap(params: &NetworkParams, expected: &FourierParams) -> Result<f64> {
    let actual = models::fourier_factorization(params)?;
    Ok(actual.0.iter().zip(&expected.0).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max))
}

/// `‖∇_u L_P − central differences‖ / ‖central differences‖` at a random `u`.
pub fn finite_difference_error(arch: &Architecture, data: &Dataset, seed: u64) -> Result<f64> {
    let params = models::init_params(arch, 0.8, seed)?;
    let g = loss_grad_w(&models::predictor(&params)?, data)?;
    let analytic = models::grad_params(&params, &g)?.flatten();
    let flat = params.flatten();
    let loss_at = |v: &[f64]| -> Result<f64> { exp_loss(&models::predictor(&params.with_flat(v))?, data) };
    let mut numeric = Vec::with_capacity(flat.len());
    let mut probe = flat.clone();
    for i in 0..flat.len() {
        let h = 1e-5 * flat[i].abs().max(1.0);
        probe[i] = flat[i] + h;
        let plus = loss_at(&probe)?;
        probe[i] = flat[i] - h;
        let minus = loss_at(&probe)?;
        probe[i] = flat[i];
        numeric.push((plus - minus) / (2.0 * h));
    }
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    Ok(spectral::norm(&diff) / spectral::norm(&numeric).max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaParams {
    pub dims: Vec<usize>,
    pub seeds: usize,
    pub fft_gd_steps: usize,
    pub fft_gd_eta: f64,
    pub lemma1_tol: f64,
    pub correlation_tol: f64,
    pub euler_tol: f64,
    pub fft_gd_tol: f64,
    pub finite_difference_tol: f64,
}

impl Default for LemmaParams {
    fn default() -> Self {
        LemmaParams {
            dims: vec![2, 4, 8],
            seeds: 50,
            fft_gd_steps: 100,
            fft_gd_eta: 0.01,
            lemma1_tol: 1e-10,
            correlation_tol: 1e-10,
            euler_tol: 1e-10,
            fft_gd_tol: 1e-8,
            finite_difference_tol: 1e-6,
        }
    }
}

/// All lemma checks over `dims × depths × seeds`; the gradient-descent and
/// finite-difference checks use a separable Gaussian dataset with `n` samples.
pub fn lemma_checks(params: &LemmaParams, depths: &[usize], n: usize) -> Vec<CheckSummary> {
    let mut lemma1 = CheckSummary::new("lemma1-fourier-factorization", params.lemma1_tol);
    let mut correlation = CheckSummary::new("correlation-theorem", params.correlation_tol);
    let mut euler = CheckSummary::new("euler-identity", params.euler_tol);
    let mut fft_gd = CheckSummary::new("fourier-gd-equivalence", params.fft_gd_tol);
    let mut fd = CheckSummary::new("finite-difference-gradient", params.finite_difference_tol);
    let fd_seeds = params.seeds.min(5);
    for &dim in &params.dims {
        let data = check_dataset(dim, n, dim as u64);
        for seed in 0..params.seeds as u64 {
            correlation.record_result(correlation_defect(dim, seed));
        }
        for &depth in depths {
            for seed in 0..params.seeds as u64 {
                lemma1.record_result(lemma1_defect(dim, depth, seed));
                for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
                    euler.record_result(euler_defect(&Architecture::new(kind, dim, depth), seed));
                }
            }
            let Ok(data) = &data else {
                fft_gd.fail();
                fd.fail();
                continue;
            };
            for seed in 0..fd_seeds as u64 {
                fft_gd.record_result(fft_gd_defect(data, depth, params.fft_gd_eta, params.fft_gd_steps, seed));
                for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
                    let arch = Architecture::new(kind, dim, depth);
                    fd.record_result(finite_difference_error(&arch, data, seed));
                }
            }
        }
    }
    vec![lemma1, correlation, euler, fft_gd, fd]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpParams {
    pub samples: usize,
    pub perturbations: usize,
    pub restarts: usize,
    pub oracle_rel_tol: f64,
    pub balanced_tol: f64,
    /// Relative slack allowed in `‖u‖² ≥ R_P(w)` for perturbed factorizations.
    pub am_gm_slack: f64,
}

impl Default for RpParams {
    fn default() -> Self {
        RpParams {
            samples: 20,
            perturbations: 100,
            restarts: 3,
            oracle_rel_tol: 1e-3,
            balanced_tol: 1e-10,
            am_gm_slack: 1e-9,
        }
    }
}

/// Numeric oracle, balanced factorization and AM–GM checks for each
/// architecture at each depth in dimension `dim`.
pub fn rp_form_checks(params: &RpParams, dim: usize, depths: &[usize], seed: u64) -> Vec<CheckSummary> {
    let mut out = Vec::new();
    for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
        let name = kind.name();
        let mut oracle = CheckSummary::new(&format!("rp-oracle-{name}"), params.oracle_rel_tol);
        let mut balanced = CheckSummary::new(&format!("rp-balanced-{name}"), params.balanced_tol);
        let mut am_gm = CheckSummary::new(&format!("rp-am-gm-{name}"), params.am_gm_slack);
        for &depth in depths {
            let arch = Architecture::new(kind, dim, depth);
            for s in 0..params.samples as u64 {
                let sample_seed = seed.wrapping_add(1000 * depth as u64 + s);
                let w = Predictor::new(SplitMix64::stream(sample_seed, 0xc3).normal_vec(dim, 1.0));
                let Ok(closed) = models::rp_closed_form(&arch, &w) else {
                    oracle.fail();
                    continue;
                };
                oracle.record_result(
                    rp_numeric_oracle(&arch, &w, params.restarts, sample_seed).map(|v| (v - closed).abs() / closed),
                );
                match models::balanced_factorization(&arch, &w) {
                    Ok(u) => {
                        balanced.record_result(factorization_gap(&u, &w, closed));
                        let mut rng = SplitMix64::stream(sample_seed, 0xc4);
                        for _ in 0..params.perturbations {
                            am_gm.record_result(
                                perturb_factorization(&u, &mut rng).and_then(|v| am_gm_violation(&v, &w, closed)),
                            );
                        }
                    }
                    Err(_) => balanced.fail(),
                }
            }
        }
        out.extend([oracle, balanced, am_gm]);
    }
    out
}

/// `max(|‖u‖² − R_P(w)| / R_P(w), ‖P(u) − w‖_∞ / ‖w‖_∞)`.
fn factorization_gap(u: &NetworkParams, w: &Predictor, closed: f64) -> Result<f64> {
    let value_gap = (u.norm_sq() - closed).abs() / closed;
    Ok(value_gap.max(feasibility_gap(u, w)?))
}

fn feasibility_gap(u: &NetworkParams, w: &Predictor) -> Result<f64> {
    let p = models::predictor(u)?.w;
    let scale = w.w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(p.iter().zip(&w.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
}

/// Relative amount by which a feasible `u` undercuts `R_P(w)`; positive
/// values violate the lower bound. Infeasible perturbations report `+∞`.
fn am_gm_violation(u: &NetworkParams, w: &Predictor, closed: f64) -> Result<f64> {
    if feasibility_gap(u, w)? > 1e-8 {
        return Ok(f64::INFINITY);
    }
    Ok((closed - u.norm_sq()) / closed)
}

/// A different factorization of the same predictor: invertible gauge
/// transforms between consecutive fully connected layers, per-coordinate
/// rescalings with unit product for diagonal layers, and per-frequency
/// complex rescalings with unit product for convolutional layers.
pub fn perturb_factorization(u: &NetworkParams, rng: &mut SplitMix64) -> Result<NetworkParams> {
    let depth = u.depth();
    let dim = u.dim();
    match u {
        NetworkParams::FullyConnected(m) => {
            let mut layers = m.clone();
            for l in 0..depth.saturating_sub(1) {
                let k = layers[l].ncols();
                let mut a = DMatrix::<f64>::identity(k, k);
                for v in a.iter_mut() {
                    *v += 0.3 * rng.normal();
                }
                let Some(inv) = a.clone().try_inverse() else { continue };
                layers[l] = &layers[l] * &a;
                layers[l + 1] = &inv * &layers[l + 1];
            }
            Ok(NetworkParams::FullyConnected(layers))
        }
        NetworkParams::Diagonal(layers) => {
            let mut layers = layers.clone();
            for d in 0..dim {
                let logs = unit_product_logs(depth, rng);
                for (layer, c) in layers.iter_mut().zip(logs) {
                    layer[d] *= c.exp();
                }
            }
            Ok(NetworkParams::Diagonal(layers))
        }
        NetworkParams::Convolutional(layers) => {
            let mut spectra: Vec<ComplexVec> = layers.iter().map(|v| dft(v)).collect();
            for d in 0..=dim / 2 {
                let mirror = (dim - d) % dim;
                let logs = unit_product_logs(depth, rng);
                let phases = if d == mirror { vec![0.0; depth] } else { unit_product_logs(depth, rng) };
                for ((s, c), phi) in spectra.iter_mut().zip(logs).zip(phases) {
                    let (re, im) = s.get(d);
                    let (sin, cos) = phi.sin_cos();
                    let r = c.exp();
                    s.re[d] = r * (re * cos - im * sin);
                    s.im[d] = r * (re * sin + im * cos);
                    s.re[mirror] = s.re[d];
                    s.im[mirror] = -s.im[d];
                }
            }
            let layers = spectra.iter().map(idft).collect::<Result<Vec<_>>>()?;
            Ok(NetworkParams::Convolutional(layers))
        }
    }
}

/// `depth` Gaussian values summing to zero.
fn unit_product_logs(depth: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let mut v = rng.normal_vec(depth, 0.5);
    let mean = v.iter().sum::<f64>() / depth as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}
