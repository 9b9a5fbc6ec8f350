//! `min ‖ŵ‖_1 s.t. y_n ⟨x_n, w⟩ ≥ 1` by ADMM.
//!
//! Splitting: `ẑ = F w` and `s = A w − 1 ≥ 0` with `A` the matrix of rows
//! `y_n x_nᵀ`. The `ẑ` step is complex soft thresholding, the `s` step
//! clips at zero and the `w` step solves `(I + AᵀA) w = Re F*(ẑ − λ) + Aᵀ(1 + s − μ)`
//! with a cached Cholesky factor (F is unitary).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{l2, SolverReport, SolverStatus};
use crate::data::Dataset;
use crate::models::Predictor;
use crate::spectral::{complex_soft_threshold, dft, idft_complex, ComplexVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub tol: f64,
    pub rho: f64,
    pub max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { tol: 1e-8, rho: 1.0, max_iters: 100_000 }
    }
}

pub fn l1_fourier_max_margin(data: &Dataset, tol: f64, rho: f64) -> SolverReport {
    l1_fourier_max_margin_with(data, &AdmmConfig { tol, rho, ..AdmmConfig::default() })
}

pub fn l1_fourier_max_margin_with(data: &Dataset, config: &AdmmConfig) -> SolverReport {
    let dim = data.dim();
    let n = data.len();

    // Separability and a feasible warm start come from the ℓ2 solver.
    let l2 = l2::l2_max_margin(data, config.tol.max(1e-10));
    if l2.status == SolverStatus::Infeasible {
        return SolverReport::infeasible(dim, 0);
    }

    let a = DMatrix::from_fn(n, dim, |i, d| data.labels()[i] * data.features()[i][d]);
    let system = DMatrix::identity(dim, dim) + a.tr_mul(&a);
    let chol = system.cholesky().expect("I + AᵀA is positive definite");
    let ones = DVector::from_element(n, 1.0);
    let rho = config.rho;

    let mut w = DVector::from_column_slice(&l2.solution.w);
    let mut z_hat = dft(w.as_slice());
    let mut s = (&a * &w - &ones).map(|v| v.max(0.0));
    let mut lambda = ComplexVec::zeros(dim);
    let mut mu = DVector::zeros(n);

    let mut status = SolverStatus::MaxIters;
    let mut iterations = 0;
    let (mut r_prim, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    for it in 0..config.max_iters {
        iterations = it + 1;
        // w-update
        let back = idft_complex(&z_hat.add_scaled(-1.0, &lambda));
        let rhs = DVector::from_column_slice(&back.re) + a.tr_mul(&(&ones + &s - &mu));
        w = chol.solve(&rhs);

        // (ẑ, s)-update
        let fw = dft(w.as_slice());
        let aw = &a * &w;
        let z_next = complex_soft_threshold(&fw.add_scaled(1.0, &lambda), 1.0 / rho);
        let s_next = (&aw - &ones + &mu).map(|v| v.max(0.0));

        // dual update
        let fw_minus_z = fw.add_scaled(-1.0, &z_next);
        let aw_slack = &aw - &ones - &s_next;
        lambda = lambda.add_scaled(1.0, &fw_minus_z);
        mu += &aw_slack;

        r_prim = (fw_minus_z.norm_sq() + aw_slack.norm_squared()).sqrt();
        let dz = idft_complex(&z_next.add_scaled(-1.0, &z_hat));
        let ds = &s_next - &s;
        r_dual = rho * (DVector::from_column_slice(&dz.re) + a.tr_mul(&ds)).norm();

        z_hat = z_next;
        s = s_next;
        if r_prim < config.tol && r_dual < config.tol {
            status = SolverStatus::Optimal;
            break;
        }
    }

    // ẑ is exactly sparse and conjugate symmetric; report its real preimage.
    let w_out = idft_complex(&z_hat).re;
    let solution = Predictor::new(w_out);
    let objective = solution.fourier_l1();
    let multipliers = mu.iter().map(|m| (-rho * m).max(0.0)).collect();
    SolverReport {
        solution,
        objective,
        iterations,
        primal_residual: r_prim,
        dual_residual: r_dual,
        status,
        multipliers,
    }
}
