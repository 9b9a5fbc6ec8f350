//! Reference solvers and certificates.

mod kkt;
mod l1_fourier;
mod l2;
pub mod nnls;
mod rp_oracle;

use serde::{Deserialize, Serialize};

pub use kkt::{
    gradient_support_residual, kkt_residual_bridge, kkt_residual_bridge_in, l2_kkt_check, param_stationarity_residual,
    support_set, KktCertificate, L2KktCheck, PenaltyDomain, UNIT_MARGIN_TOL,
};
pub use l1_fourier::{l1_fourier_max_margin, l1_fourier_max_margin_with, AdmmConfig};
pub use l2::l2_max_margin;
pub use rp_oracle::{rp_numeric_oracle, rp_numeric_oracle_runs, OracleRun, MAX_VIOLATION};

use crate::models::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solution: Predictor,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolverStatus,
    /// Dual multipliers `α_n ≥ 0`, one per sample.
    pub multipliers: Vec<f64>,
}

impl SolverReport {
    fn infeasible(dim: usize, iterations: usize) -> Self {
        Self {
            solution: Predictor::new(vec![0.0; dim]),
            objective: f64::INFINITY,
            iterations,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            status: SolverStatus::Infeasible,
            multipliers: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}
