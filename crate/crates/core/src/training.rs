//! Exponential-loss gradient descent over any parameterization.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{self, Architecture, FourierParams, NetworkParams, Predictor};
use crate::spectral::{self, dft, ComplexVec};

/// Exponents above this are reported as overflow.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Training stops before a step would push `‖w‖` or `‖u‖` past this.
pub const NORM_LIMIT: f64 = 1e100;

const ARMIJO_C: f64 = 1e-4;
const MAX_SHRINKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepPolicy {
    /// `η_t = η`.
    Fixed { eta: f64 },
    /// `η_t = η / L_P(u[t])`.
    LossAdaptive { eta: f64 },
}

impl StepPolicy {
    pub fn eta(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { eta } | StepPolicy::LossAdaptive { eta } => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub step_policy: StepPolicy,
    pub init_scale: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the recorded direction change stays below this for three
    /// consecutive recordings. Zero disables early stopping.
    pub direction_tol: f64,
    pub trace_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_policy: StepPolicy::LossAdaptive { eta: 0.01 },
            init_scale: 0.1,
            seed: 1,
            max_iters: 1_000_000,
            direction_tol: 0.0,
            trace_stride: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let eta = self.step_policy.eta();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {eta}")));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init_scale must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidConfig("trace_stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// `L_P(u[t])`; underflows to zero late in a run, see `log_loss`.
    pub loss: f64,
    pub log_loss: f64,
    pub w_norm: f64,
    pub param_norm: f64,
    /// `w[t] / ‖w[t]‖`.
    pub direction: Vec<f64>,
    /// `min_n y_n ⟨x_n, direction⟩`.
    pub min_margin: f64,
    /// `‖dir_t − dir_{previous record}‖`; NaN on the first record.
    pub dir_change: f64,
    /// `z[t] / ‖z[t]‖` with `z = −∇_w L`.
    pub grad_direction: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    DirectionConverged,
    MaxIters,
    /// The next step would exceed [`NORM_LIMIT`].
    NormLimit,
    /// No backtracked loss-adaptive step satisfied the Armijo condition.
    StepUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub stop: StopReason,
    /// False if the loss ever increased under a fixed step.
    pub loss_nonincreasing: bool,
}

impl TrainTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace always holds the initial record")
    }

    /// The first record at or after `fraction` of the run.
    pub fn at_progress(&self, fraction: f64) -> &TraceRecord {
        let target = (fraction * self.iterations as f64).round() as usize;
        self.records.iter().find(|r| r.t >= target).unwrap_or_else(|| self.last())
    }

    /// CSV with header `t,loss,w_norm,min_margin,dir_change,cos_to_reference`.
    /// The last column is left empty without a reference direction.
    pub fn write_csv<W: Write>(&self, writer: W, reference: Option<&[f64]>) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "loss", "w_norm", "min_margin", "dir_change", "cos_to_reference"])?;
        for r in &self.records {
            let cos = reference.map(|w| spectral::cosine(&r.direction, w));
            out.write_record([
                r.t.to_string(),
                format!("{:e}", r.loss),
                format!("{:e}", r.w_norm),
                format!("{:e}", r.min_margin),
                if r.dir_change.is_nan() { String::new() } else { format!("{:e}", r.dir_change) },
                cos.map(|c| format!("{c:.12}")).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `Σ_n exp(−y_n ⟨x_n, w⟩)`, or `+∞` when an exponent exceeds the guard.
pub fn exp_loss(w: &Predictor, data: &Dataset) -> Result<f64> {
    let margins = data.margins(&w.w)?;
    if margins.iter().any(|&m| -m > EXPONENT_GUARD) {
        return Ok(f64::INFINITY);
    }
    Ok(margins.iter().map(|m| (-m).exp()).sum())
}

/// `∇_w L = −Σ_n exp(−y_n ⟨x_n, w⟩) y_n x_n`.
pub fn loss_grad_w(w: &Predictor, data: &Dataset) -> Result<Vec<f64>> {
    let margins = data.margins(&w.w)?;
    if let Some(&m) = margins.iter().find(|&&m| -m > EXPONENT_GUARD) {
        return Err(Error::Overflow(-m));
    }
    let weights: Vec<f64> = margins.iter().map(|m| (-m).exp()).collect();
    Ok(weighted_signed_sum(data, &weights, -1.0))
}

fn weighted_signed_sum(data: &Dataset, weights: &[f64], sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; data.dim()];
    for (n, (x, y)) in data.features().iter().zip(data.labels()).enumerate() {
        let c = sign * weights[n] * y;
        for (o, v) in out.iter_mut().zip(x) {
            *o += c * v;
        }
    }
    out
}

/// Loss, log-loss and the gradient `∇_w L` scaled by `scale_by_loss ? 1/L : 1`.
///
/// The loss-normalized gradient is a softmax-weighted sum and never underflows.
struct LossEval {
    loss: f64,
    log_loss: f64,
    grad: Vec<f64>,
    min_margin: f64,
}

fn evaluate(w: &[f64], data: &Dataset, normalize: bool) -> Result<LossEval> {
    let margins = data.margins(w)?;
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    if -min_margin > EXPONENT_GUARD {
        return Err(Error::Overflow(-min_margin));
    }
    let shifted: Vec<f64> = margins.iter().map(|m| (-(m - min_margin)).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let log_loss = -min_margin + total.ln();
    let loss = log_loss.exp();
    let grad = if normalize {
        let weights: Vec<f64> = shifted.iter().map(|s| s / total).collect();
        weighted_signed_sum(data, &weights, -1.0)
    } else {
        let weights: Vec<f64> = margins.iter().map(|m| (-m).exp()).collect();
        weighted_signed_sum(data, &weights, -1.0)
    };
    Ok(LossEval { loss, log_loss, grad, min_margin })
}

/// Rescale so that `min_n y_n ⟨x_n, w⟩ = 1`.
pub fn normalize_to_unit_margin(w: &Predictor, data: &Dataset) -> Result<Predictor> {
    let m = data.min_margin(&w.w)?;
    if !(m > 0.0) {
        return Err(Error::NonPositiveMargin(m));
    }
    Ok(w.scaled(1.0 / m))
}

/// Gradient descent from a random initialization drawn with `config.seed`.
pub fn gd_train(arch: &Architecture, data: &Dataset, config: &TrainConfig) -> Result<(NetworkParams, TrainTrace)> {
    let init = models::init_params(arch, config.init_scale, config.seed)?;
    gd_train_from(init, data, config)
}

/// Gradient descent `u[t+1] = u[t] − η_t ∇_u L_P(u[t])` from `init`.
pub fn gd_train_from(init: NetworkParams, data: &Dataset, config: &TrainConfig) -> Result<(NetworkParams, TrainTrace)> {
    config.validate()?;
    init.validate()?;
    if init.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: init.dim() });
    }
    let normalize = matches!(config.step_policy, StepPolicy::LossAdaptive { .. });
    let eta = config.step_policy.eta();

    let mut params = init;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut loss_nonincreasing = true;
    let mut prev_loss = f64::INFINITY;
    let mut loss_100_ago = f64::NAN;
    let mut calm_records = 0usize;
    let mut stop = StopReason::MaxIters;
    let mut t = 0usize;
    let mut w = models::predictor(&params)?.w;

    loop {
        let eval = evaluate(&w, data, normalize)?;

        if !normalize {
            if eval.loss > prev_loss {
                loss_nonincreasing = false;
            }
            if t.is_multiple_of(100) {
                if loss_100_ago.is_finite() && eval.loss > 10.0 * loss_100_ago {
                    return Err(Error::Diverged { step: t, from: loss_100_ago, to: eval.loss });
                }
                loss_100_ago = eval.loss;
            }
        }
        prev_loss = eval.loss;

        let mut next = None;
        if t < config.max_iters {
            let grad_u = models::grad_params(&params, &eval.grad)?;
            let adaptive =
                normalize.then(|| Adaptive { w: &w, log_loss: eval.log_loss, w_grad_norm: spectral::norm(&eval.grad) });
            next = take_step(&params, &grad_u, eta, data, adaptive)?;
            stop = match next {
                Some(_) => StopReason::MaxIters,
                None if normalize => StopReason::StepUnstable,
                None => StopReason::NormLimit,
            };
        }
        let finished = next.is_none();
        if t.is_multiple_of(config.trace_stride) || finished {
            let w_norm = spectral::norm(&w);
            let direction: Vec<f64> = w.iter().map(|v| v / w_norm).collect();
            let dir_change = records.last().map_or(f64::NAN, |r| {
                r.direction.iter().zip(&direction).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            });
            let g_norm = spectral::norm(&eval.grad);
            records.push(TraceRecord {
                t,
                loss: eval.loss,
                log_loss: eval.log_loss,
                w_norm,
                param_norm: params.norm(),
                min_margin: eval.min_margin / w_norm,
                dir_change,
                grad_direction: eval.grad.iter().map(|g| -g / g_norm).collect(),
                direction,
            });
            if config.direction_tol > 0.0 && dir_change < config.direction_tol {
                calm_records += 1;
            } else {
                calm_records = 0;
            }
            if calm_records >= 3 && !finished {
                stop = StopReason::DirectionConverged;
                break;
            }
        }
        let Some((p, w_next)) = next else { break };
        params = p;
        w = w_next;
        t += 1;
    }

    Ok((params, TrainTrace { records, iterations: t, stop, loss_nonincreasing }))
}

/// Loss-adaptive state passed to [`take_step`].
struct Adaptive<'a> {
    w: &'a [f64],
    log_loss: f64,
    /// `‖∇_w L / L‖`.
    w_grad_norm: f64,
}

/// `params − step·grad_u`, or `None` if it leaves the representable range.
///
/// Under the loss-adaptive policy (`grad_u` is then the loss-normalized
/// gradient) the step `eta` is first shrunk so that `‖Δw‖ ≤ eta·‖∇_w L / L‖`,
/// the distance a depth-1 network would move, then halved until the Armijo
/// condition `L(next) ≤ L(u)(1 − c·step·‖grad_u‖²)` holds.
fn take_step(
    params: &NetworkParams,
    grad_u: &NetworkParams,
    eta: f64,
    data: &Dataset,
    adaptive: Option<Adaptive>,
) -> Result<Option<(NetworkParams, Vec<f64>)>> {
    let propose = |step: f64| -> Result<Option<(NetworkParams, Vec<f64>)>> {
        let candidate = params.add_scaled(-step, grad_u);
        let candidate_norm = candidate.norm();
        if !(candidate_norm.is_finite() && candidate_norm < NORM_LIMIT) {
            return Ok(None);
        }
        let w_next = models::predictor(&candidate)?.w;
        Ok((spectral::norm(&w_next) < NORM_LIMIT).then_some((candidate, w_next)))
    };
    let Some(state) = adaptive else {
        return propose(eta);
    };
    let g_sq = grad_u.norm_sq();
    let max_move = eta * state.w_grad_norm;
    let mut step = eta;
    for _ in 0..MAX_SHRINKS {
        let Some((_, w_next)) = propose(step)? else {
            step *= 0.5;
            continue;
        };
        let moved = spectral::norm(&w_next.iter().zip(state.w).map(|(a, b)| a - b).collect::<Vec<_>>());
        if moved <= max_move * (1.0 + 1e-9) {
            break;
        }
        step *= 0.99 * max_move / moved;
    }
    for _ in 0..=MAX_SHRINKS {
        if let Some((candidate, w_next)) = propose(step)? {
            let decrease = (1.0 - ARMIJO_C * step * g_sq).max(f64::MIN_POSITIVE).ln();
            if let Ok(e) = evaluate(&w_next, data, false) {
                if e.log_loss - state.log_loss <= decrease {
                    return Ok(Some((candidate, w_next)));
                }
            }
        }
        step *= 0.5;
    }
    Ok(None)
}

/// Gradient descent on the complex diagonal network `ŵ = ⊙_l û_l` with loss
/// `Σ_n exp(−y_n Re⟨x̂_n, ŵ⟩)` and fixed step `eta`. Returns the iterates
/// `û[0], …, û[steps]`.
pub fn fourier_diagonal_gd(init: FourierParams, data: &Dataset, eta: f64, steps: usize) -> Result<Vec<FourierParams>> {
    let spectra: Vec<ComplexVec> = data.features().iter().map(|x| dft(x)).collect();
    let labels = data.labels();
    let mut iterates = vec![init];
    for _ in 0..steps {
        let current = iterates.last().unwrap();
        let w_hat = current.predictor_hat();
        let mut g_hat = ComplexVec::zeros(w_hat.len());
        for (x_hat, &y) in spectra.iter().zip(labels) {
            // Re(x̂ᵀ conj(ŵ))
            let inner: f64 = (0..w_hat.len()).map(|d| x_hat.re[d] * w_hat.re[d] + x_hat.im[d] * w_hat.im[d]).sum();
            let exponent = -y * inner;
            if exponent > EXPONENT_GUARD {
                return Err(Error::Overflow(exponent));
            }
            g_hat = g_hat.add_scaled(-y * exponent.exp(), x_hat);
        }
        let grads = current.grad(&g_hat);
        let next = current.step(eta, &grads);
        iterates.push(next);
    }
    Ok(iterates)
}
