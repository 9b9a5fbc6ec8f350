//! Nonnegative least squares `min_{x ≥ 0} ‖A x − b‖`.
//!
//! Projected gradient with Barzilai–Borwein steps, followed by one exact
//! least-squares solve on the positive set when that stays feasible.

use nalgebra::{DMatrix, DVector};

pub const MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `‖A x − b‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// `columns[j]` is column `j` of `A`.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> NnlsSolution {
    let k = columns.len();
    if k == 0 {
        return NnlsSolution { x: Vec::new(), residual: crate::spectral::norm(b), iterations: 0 };
    }
    let m = b.len();
    let a = DMatrix::from_fn(m, k, |i, j| columns[j][i]);
    let bv = DVector::from_column_slice(b);
    let gram = a.tr_mul(&a);
    let atb = a.tr_mul(&bv);
    let lipschitz = gram.trace().max(f64::MIN_POSITIVE);

    let grad = |x: &DVector<f64>| &gram * x - &atb;
    let objective = |x: &DVector<f64>| 0.5 * (&a * x - &bv).norm_squared();
    let stop_tol = 1e-15 * (1.0 + atb.norm());

    let mut x = DVector::zeros(k);
    let mut g = grad(&x);
    let mut step = 1.0 / lipschitz;
    let mut best = (objective(&x), x.clone());
    let mut iterations = 0;
    for it in 0..MAX_ITERS {
        iterations = it + 1;
        let projected = DVector::from_fn(k, |i, _| if x[i] > 0.0 { g[i] } else { g[i].min(0.0) });
        if projected.norm() <= stop_tol {
            break;
        }
        let x_new = (&x - step * &g).map(|v| v.max(0.0));
        let g_new = grad(&x_new);
        let dx = &x_new - &x;
        let dg = &g_new - &g;
        let curvature = dx.dot(&dg);
        step = if curvature > 0.0 { dx.norm_squared() / curvature } else { 1.0 / lipschitz };
        x = x_new;
        g = g_new;
        let f = objective(&x);
        if f < best.0 {
            best = (f, x.clone());
        }
    }
    let mut x = best.1;

    // Exact solve on the positive set.
    let positive: Vec<usize> = (0..k).filter(|&j| x[j] > 0.0).collect();
    if !positive.is_empty() {
        let sub = DMatrix::from_fn(m, positive.len(), |i, j| a[(i, positive[j])]);
        if let Ok(z) = sub.clone().svd(true, true).solve(&bv, 1e-13) {
            if z.iter().all(|&v| v > 0.0) {
                let mut candidate = DVector::zeros(k);
                for (j, &p) in positive.iter().enumerate() {
                    candidate[p] = z[j];
                }
                let g_c = grad(&candidate);
                let kkt_ok = (0..k).all(|j| candidate[j] > 0.0 || g_c[j] >= -1e-12 * (1.0 + atb.norm()));
                if kkt_ok && objective(&candidate) <= objective(&x) {
                    x = candidate;
                }
            }
        }
    }
    let residual = (&a * &x - &bv).norm();
    NnlsSolution { x: x.iter().copied().collect(), residual, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_inside_orthant() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]];
        let s = nnls(&cols, &[3.0, 4.0, 0.0]);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn clips_negative_direction() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = nnls(&cols, &[-1.0, 2.0]);
        assert_eq!(s.x[0], 0.0);
        assert!((s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_over_active_sets() {
        // Enumerate all 2^k supports for a small dense instance.
        let cols = vec![vec![1.0, 0.3, -0.2, 0.5], vec![-0.4, 1.1, 0.7, 0.0], vec![0.2, -0.9, 1.3, 0.8]];
        let b = [0.7, -1.2, 0.4, 1.5];
        let mut best = f64::INFINITY;
        for mask in 0u32..8 {
            let idx: Vec<usize> = (0..3).filter(|j| mask >> j & 1 == 1).collect();
            if idx.is_empty() {
                best = best.min(crate::spectral::norm(&b));
                continue;
            }
            let a = DMatrix::from_fn(4, idx.len(), |i, j| cols[idx[j]][i]);
            let z = a.clone().svd(true, true).solve(&DVector::from_column_slice(&b), 1e-14).unwrap();
            if z.iter().all(|&v| v >= 0.0) {
                best = best.min((&a * z - DVector::from_column_slice(&b)).norm());
            }
        }
        let s = nnls(&cols, &b);
        assert!(s.x.iter().all(|&v| v >= 0.0));
        assert!((s.residual - best).abs() < 1e-10, "{} vs {best}", s.residual);
    }
}
