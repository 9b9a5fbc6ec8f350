//! First-order certificates for `min ‖ŵ‖_p s.t. y_n ⟨x_n, w⟩ ≥ 1` and for
//! stationarity of `min ‖u‖² s.t. y_n ⟨x_n, P(u)⟩ ≥ 1`.

use serde::{Deserialize, Serialize};

use super::nnls::nnls;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{self, NetworkParams, Predictor};
use crate::spectral::{self, dft, ComplexVec};

/// Allowed deviation of the minimum margin from 1 for "unit margin" inputs.
pub const UNIT_MARGIN_TOL: f64 = 1e-9;

/// Which basis the bridge penalty acts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyDomain {
    /// `‖ŵ‖_p` (convolutional networks).
    Fourier,
    /// `‖w‖_p` (diagonal networks).
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub support_indices: Vec<usize>,
    /// Multipliers on `support_indices`, absorbing the positive scale.
    pub alphas: Vec<f64>,
    /// `‖Σ α_n y_n x̂_n − g(ŵ)‖ / ‖g(ŵ)‖` over nonzero coordinates.
    pub equality_residual: f64,
    /// `max (|Σ α_n y_n x̂_n[d]| − 1)_+` over zero coordinates; `p = 1` only.
    pub inequality_violation: f64,
    /// `Σ α_n`; informational.
    pub scale: f64,
    pub nonzero_coordinates: Vec<usize>,
    pub p: f64,
    pub margin_tol: f64,
    pub zero_tol: f64,
    pub domain: PenaltyDomain,
}

fn check_unit_margin(w: &[f64], data: &Dataset) -> Result<f64> {
    let m = data.min_margin(w)?;
    if (m - 1.0).abs() > UNIT_MARGIN_TOL {
        return Err(Error::NonUnitMargin(m));
    }
    Ok(m)
}

/// Indices with `y_n ⟨x_n, w⟩ ≤ 1 + margin_tol` for a unit-margin `w`.
pub fn support_set(w: &Predictor, data: &Dataset, margin_tol: f64) -> Result<Vec<usize>> {
    check_unit_margin(&w.w, data)?;
    Ok(data.margins(&w.w)?.iter().enumerate().filter(|(_, &m)| m <= 1.0 + margin_tol).map(|(n, _)| n).collect())
}

/// Certificate for the Fourier-domain bridge penalty.
pub fn kkt_residual_bridge(
    w: &Predictor,
    data: &Dataset,
    p: f64,
    margin_tol: f64,
    zero_tol: f64,
) -> Result<KktCertificate> {
    kkt_residual_bridge_in(PenaltyDomain::Fourier, w, data, p, margin_tol, zero_tol)
}

/// Fits `α ≥ 0` on the support set so that `Σ α_n y_n x̂_n` matches the
/// subgradient `p e^{iφ_ŵ[d]} |ŵ[d]|^{p−1}` on coordinates with
/// `|ŵ[d]| > zero_tol · max_d |ŵ[d]|`.
pub fn kkt_residual_bridge_in(
    domain: PenaltyDomain,
    w: &Predictor,
    data: &Dataset,
    p: f64,
    margin_tol: f64,
    zero_tol: f64,
) -> Result<KktCertificate> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("bridge exponent {p} outside (0, 1]")));
    }
    let support = support_set(w, data, margin_tol)?;
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let transform = |v: &[f64]| match domain {
        PenaltyDomain::Fourier => dft(v),
        PenaltyDomain::Time => ComplexVec::from_real(v),
    };
    let w_t = transform(&w.w);
    let dim = w_t.len();
    let max_mod = (0..dim).map(|d| w_t.abs(d)).fold(0.0, f64::max);
    let threshold = zero_tol * max_mod;
    let nonzero: Vec<usize> = (0..dim).filter(|&d| w_t.abs(d) > threshold).collect();
    let zero: Vec<usize> = (0..dim).filter(|&d| w_t.abs(d) <= threshold).collect();

    let mut target = Vec::with_capacity(2 * nonzero.len());
    for &d in &nonzero {
        let m = w_t.abs(d);
        let k = p * m.powf(p - 1.0) / m;
        target.push(k * w_t.re[d]);
        target.push(k * w_t.im[d]);
    }
    let spectra: Vec<ComplexVec> = support.iter().map(|&n| transform(&data.signed_sample(n))).collect();
    let columns: Vec<Vec<f64>> =
        spectra.iter().map(|x| nonzero.iter().flat_map(|&d| [x.re[d], x.im[d]]).collect()).collect();
    let fit = nnls(&columns, &target);
    let equality_residual = fit.residual / spectral::norm(&target);

    let inequality_violation = if p == 1.0 {
        zero.iter()
            .map(|&d| {
                let (mut re, mut im) = (0.0, 0.0);
                for (a, x) in fit.x.iter().zip(&spectra) {
                    re += a * x.re[d];
                    im += a * x.im[d];
                }
                (re.hypot(im) - 1.0).max(0.0)
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    Ok(KktCertificate {
        scale: fit.x.iter().sum(),
        alphas: fit.x,
        support_indices: support,
        equality_residual,
        inequality_violation,
        nonzero_coordinates: nonzero,
        p,
        margin_tol,
        zero_tol,
        domain,
    })
}

/// Distance between the parameter direction and the direction of
/// `∇_u P(û) ẑ`, where `ẑ = −∇_w L / ‖∇_w L‖` at `P(params)`.
pub fn param_stationarity_residual(params: &NetworkParams, data: &Dataset) -> Result<f64> {
    let w = models::predictor(params)?;
    let m = data.min_margin(&w.w)?;
    if !(m > 0.0) {
        return Err(Error::NonPositiveMargin(m));
    }
    let grad = loss_grad_direction(&w, data)?;
    let g_norm = spectral::norm(&grad);
    let z: Vec<f64> = grad.iter().map(|g| -g / g_norm).collect();
    let u_dir = params.scale(1.0 / params.norm());
    let v = models::grad_params(&u_dir, &z)?;
    let v_norm = v.norm();
    if v_norm < 1e-14 {
        return Err(Error::ZeroJacobianAction(v_norm));
    }
    let v_dir = v.scale(1.0 / v_norm);
    let plus = u_dir.add_scaled(-1.0, &v_dir).norm();
    let minus = u_dir.add_scaled(1.0, &v_dir).norm();
    Ok(plus.min(minus))
}

/// `∇_w L` up to a positive factor; margins are shifted so nothing underflows.
fn loss_grad_direction(w: &Predictor, data: &Dataset) -> Result<Vec<f64>> {
    let margins = data.margins(&w.w)?;
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = vec![0.0; data.dim()];
    for (n, m) in margins.iter().enumerate() {
        let c = -(-(m - min)).exp() * data.labels()[n];
        for (o, x) in out.iter_mut().zip(&data.features()[n]) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// Residual of the best nonnegative combination of support vectors
/// `{y_n x_n : n ∈ S}` approximating the unit vector `grad_direction`, where
/// `S` is the support set of `direction` after unit-margin normalization.
pub fn gradient_support_residual(
    direction: &[f64],
    grad_direction: &[f64],
    data: &Dataset,
    margin_tol: f64,
) -> Result<f64> {
    let w = crate::training::normalize_to_unit_margin(&Predictor::new(direction.to_vec()), data)?;
    let support = support_set(&w, data, margin_tol)?;
    let columns: Vec<Vec<f64>> = support.iter().map(|&n| data.signed_sample(n)).collect();
    let fit = nnls(&columns, grad_direction);
    Ok(fit.residual / spectral::norm(grad_direction))
}

/// Independent KKT recomputation for a hard-margin SVM solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2KktCheck {
    /// `‖w − Σ α_n y_n x_n‖ / ‖w‖`.
    pub stationarity: f64,
    /// `max_n (1 − y_n ⟨x_n, w⟩)_+`.
    pub primal_violation: f64,
    /// `max_n |α_n (y_n ⟨x_n, w⟩ − 1)|`.
    pub complementary_gap: f64,
    pub dual_feasible: bool,
}

impl L2KktCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.dual_feasible && self.stationarity <= tol && self.primal_violation <= tol && self.complementary_gap <= tol
    }
}

pub fn l2_kkt_check(w: &[f64], alphas: &[f64], data: &Dataset) -> Result<L2KktCheck> {
    let margins = data.margins(w)?;
    let mut combo = vec![0.0; data.dim()];
    for (n, a) in alphas.iter().enumerate() {
        for (c, x) in combo.iter_mut().zip(data.signed_sample(n)) {
            *c += a * x;
        }
    }
    let diff: Vec<f64> = w.iter().zip(&combo).map(|(a, b)| a - b).collect();
    Ok(L2KktCheck {
        stationarity: spectral::norm(&diff) / spectral::norm(w).max(f64::MIN_POSITIVE),
        primal_violation: margins.iter().map(|m| (1.0 - m).max(0.0)).fold(0.0, f64::max),
        complementary_gap: alphas.iter().zip(&margins).map(|(a, m)| (a * (m - 1.0)).abs()).fold(0.0, f64::max),
        dual_feasible: alphas.iter().all(|&a| a >= 0.0),
    })
}
