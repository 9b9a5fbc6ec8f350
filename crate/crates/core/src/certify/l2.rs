//! Hard-margin SVM through the origin, `min ‖w‖² s.t. y_n ⟨x_n, w⟩ ≥ 1`,
//! by coordinate ascent on the dual `max_{α ≥ 0} Σα − ½ αᵀQα`.

use nalgebra::{DMatrix, DVector};

use super::{SolverReport, SolverStatus};
use crate::data::Dataset;
use crate::models::Predictor;
use crate::spectral::dot;

pub const MAX_SWEEPS: usize = 200_000;
/// Total dual mass beyond which the data is declared non-separable
/// (equivalent to a margin below `1e-6`).
pub const DUAL_MASS_LIMIT: f64 = 1e12;

pub fn l2_max_margin(data: &Dataset, tol: f64) -> SolverReport {
    let n = data.len();
    let dim = data.dim();
    let signed: Vec<Vec<f64>> = (0..n).map(|i| data.signed_sample(i)).collect();
    let diag: Vec<f64> = signed.iter().map(|v| dot(v, v)).collect();

    if diag.contains(&0.0) {
        return SolverReport::infeasible(dim, 0);
    }

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut sweeps = 0;
    let mut mass = 0.0;
    let inner_tol = 1e-2 * tol;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        for i in 0..n {
            let m = dot(&signed[i], &w);
            let next = (alpha[i] + (1.0 - m) / diag[i]).max(0.0);
            let delta = next - alpha[i];
            if delta != 0.0 {
                for (wd, xd) in w.iter_mut().zip(&signed[i]) {
                    *wd += delta * xd;
                }
                mass += delta;
                alpha[i] = next;
            }
        }
        if mass > DUAL_MASS_LIMIT {
            return SolverReport::infeasible(dim, sweeps);
        }
        let violation = kkt_violation(&signed, &alpha, &w);
        if violation <= inner_tol {
            converged = true;
            break;
        }
    }

    if converged {
        if let Some((a, pw)) = polish(&signed, &alpha) {
            alpha = a;
            w = pw;
        }
    }

    let margins: Vec<f64> = signed.iter().map(|v| dot(v, &w)).collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    if !converged && min_margin <= 0.0 {
        return SolverReport::infeasible(dim, sweeps);
    }
    let primal_residual = (1.0 - min_margin).max(0.0);
    let gap = alpha.iter().zip(&margins).map(|(a, m)| (a * (m - 1.0)).abs()).fold(0.0, f64::max);
    let status =
        if converged && primal_residual <= tol && gap <= tol { SolverStatus::Optimal } else { SolverStatus::MaxIters };
    let objective = dot(&w, &w);
    SolverReport {
        solution: Predictor::new(w),
        objective,
        iterations: sweeps,
        primal_residual,
        dual_residual: gap,
        status,
        multipliers: alpha,
    }
}

fn kkt_violation(signed: &[Vec<f64>], alpha: &[f64], w: &[f64]) -> f64 {
    signed
        .iter()
        .zip(alpha)
        .map(|(v, &a)| {
            let slack = 1.0 - dot(v, w);
            if a > 0.0 {
                slack.abs()
            } else {
                slack.max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solve `Q_SS α_S = 1` exactly on the current support; keep it only if it
/// stays dual and primal feasible.
fn polish(signed: &[Vec<f64>], alpha: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let k = support.len();
    let q = DMatrix::from_fn(k, k, |a, b| dot(&signed[support[a]], &signed[support[b]]));
    let sol = q.svd(true, true).solve(&DVector::from_element(k, 1.0), 1e-13).ok()?;
    if sol.iter().any(|&v| v < 0.0) {
        return None;
    }
    let mut full = vec![0.0; alpha.len()];
    let dim = signed[0].len();
    let mut w = vec![0.0; dim];
    for (j, &i) in support.iter().enumerate() {
        full[i] = sol[j];
        for (wd, xd) in w.iter_mut().zip(&signed[i]) {
            *wd += sol[j] * xd;
        }
    }
    let feasible = signed.iter().all(|v| dot(v, &w) >= 1.0 - 1e-12);
    let before = kkt_violation(signed, alpha, &{
        let mut w0 = vec![0.0; dim];
        for (i, &a) in alpha.iter().enumerate() {
            for (wd, xd) in w0.iter_mut().zip(&signed[i]) {
                *wd += a * xd;
            }
        }
        w0
    });
    (feasible && kkt_violation(signed, &full, &w) <= before).then_some((full, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let data = Dataset::new(vec![vec![1.0], vec![-1.0]], vec![1.0, -1.0]).unwrap();
        let r = l2_max_margin(&data, 1e-10);
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.solution.w[0] - 1.0).abs() < 1e-12);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inactive_third_constraint() {
        let data = Dataset::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], vec![1.0, -1.0, 1.0]).unwrap();
        // w = (1, 0) gives the third point margin 0 < 1, so it is active;
        // shift it so its margin under (1, 0) is 2.
        let data2 = Dataset::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![2.0, 1.0]], vec![1.0, -1.0, 1.0]).unwrap();
        let r = l2_max_margin(&data2, 1e-10);
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.solution.w[0] - 1.0).abs() < 1e-12 && r.solution.w[1].abs() < 1e-12);
        assert_eq!(r.multipliers[2], 0.0);
        let r = l2_max_margin(&data, 1e-10);
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.solution.w[0] - 1.0).abs() < 1e-10 && (r.solution.w[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn xor_is_infeasible() {
        let data = Dataset::new(
            vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        )
        .unwrap();
        assert_eq!(l2_max_margin(&data, 1e-8).status, SolverStatus::Infeasible);
    }

    #[test]
    fn zero_sample_is_infeasible() {
        let data = Dataset::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(l2_max_margin(&data, 1e-8).status, SolverStatus::Infeasible);
    }
}
