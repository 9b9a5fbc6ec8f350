//! Linear network parameterizations `w = P(u)`.
//!
//! Three families: fully connected (`P(u) = u_1 u_2 ⋯ u_L`), diagonal
//! (`w[d] = Π_l u_l[d]`) and full-width circular convolutional
//! (`f_u(x) = ((x ⋆ u_1) ⋆ ⋯ ⋆ u_{L-1})ᵀ u_L`). All three are homogeneous
//! polynomials of degree `L` in the parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::spectral::{self, circ_correlate_adjoint, circ_cross_correlate, dft, flip, ComplexVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    FullyConnected,
    Diagonal,
    Convolutional,
}

impl ArchKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchKind::FullyConnected => "fc",
            ArchKind::Diagonal => "diag",
            ArchKind::Convolutional => "conv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ArchKind,
    pub depth: usize,
    /// `D_0, …, D_L` for fully connected nets (`D_0 = D`, `D_L = 1`); `[D]` otherwise.
    pub layer_widths: Vec<usize>,
}

impl Architecture {
    /// Fully connected with widths `(D, D, …, D, 1)`.
    pub fn fully_connected(dim: usize, depth: usize) -> Self {
        let mut layer_widths = vec![dim; depth];
        layer_widths.push(1);
        Self { kind: ArchKind::FullyConnected, depth, layer_widths }
    }

    pub fn fully_connected_with_widths(layer_widths: Vec<usize>) -> Result<Self> {
        let arch = Self { kind: ArchKind::FullyConnected, depth: layer_widths.len().saturating_sub(1), layer_widths };
        arch.validate()?;
        Ok(arch)
    }

    pub fn diagonal(dim: usize, depth: usize) -> Self {
        Self { kind: ArchKind::Diagonal, depth, layer_widths: vec![dim] }
    }

    pub fn convolutional(dim: usize, depth: usize) -> Self {
        Self { kind: ArchKind::Convolutional, depth, layer_widths: vec![dim] }
    }

    pub fn new(kind: ArchKind, dim: usize, depth: usize) -> Self {
        match kind {
            ArchKind::FullyConnected => Self::fully_connected(dim, depth),
            ArchKind::Diagonal => Self::diagonal(dim, depth),
            ArchKind::Convolutional => Self::convolutional(dim, depth),
        }
    }

    pub fn dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        match self.kind {
            ArchKind::FullyConnected => {
                if self.layer_widths.len() != self.depth + 1 {
                    return Err(Error::InvalidConfig(format!(
                        "fully connected depth {} needs {} widths, got {}",
                        self.depth,
                        self.depth + 1,
                        self.layer_widths.len()
                    )));
                }
                if *self.layer_widths.last().unwrap() != 1 {
                    return Err(Error::InvalidConfig("output width must be 1".into()));
                }
            }
            _ => {
                if self.layer_widths.len() != 1 {
                    return Err(Error::InvalidConfig("diagonal/convolutional nets take a single width D".into()));
                }
            }
        }
        Ok(())
    }
}

/// Polynomial degree `ν` of `P`; always the depth.
pub fn homogeneity_degree(arch: &Architecture) -> usize {
    arch.depth
}

/// Per-layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkParams {
    /// `u_l ∈ R^{D_{l-1} × D_l}`.
    FullyConnected(Vec<DMatrix<f64>>),
    Diagonal(Vec<Vec<f64>>),
    Convolutional(Vec<Vec<f64>>),
}

impl NetworkParams {
    pub fn kind(&self) -> ArchKind {
        match self {
            NetworkParams::FullyConnected(_) => ArchKind::FullyConnected,
            NetworkParams::Diagonal(_) => ArchKind::Diagonal,
            NetworkParams::Convolutional(_) => ArchKind::Convolutional,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            NetworkParams::FullyConnected(m) => m.len(),
            NetworkParams::Diagonal(v) | NetworkParams::Convolutional(v) => v.len(),
        }
    }

    /// Input dimension `D`.
    pub fn dim(&self) -> usize {
        match self {
            NetworkParams::FullyConnected(m) => m[0].nrows(),
            NetworkParams::Diagonal(v) | NetworkParams::Convolutional(v) => v[0].len(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            NetworkParams::FullyConnected(m) => {
                let mut layer_widths: Vec<usize> = m.iter().map(|u| u.nrows()).collect();
                layer_widths.push(m.last().map_or(0, |u| u.ncols()));
                Architecture { kind: ArchKind::FullyConnected, depth: m.len(), layer_widths }
            }
            _ => Architecture::new(self.kind(), self.dim(), self.depth()),
        }
    }

    /// Checks that the layers chain and carry finite entries.
    pub fn validate(&self) -> Result<()> {
        if self.depth() == 0 {
            return Err(Error::ShapeMismatch("no layers".into()));
        }
        match self {
            NetworkParams::FullyConnected(m) => {
                for (l, pair) in m.windows(2).enumerate() {
                    if pair[0].ncols() != pair[1].nrows() {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {} has {} columns but layer {} has {} rows",
                            l + 1,
                            pair[0].ncols(),
                            l + 2,
                            pair[1].nrows()
                        )));
                    }
                }
                if m.last().unwrap().ncols() != 1 {
                    return Err(Error::ShapeMismatch("last layer must have one column".into()));
                }
            }
            NetworkParams::Diagonal(v) | NetworkParams::Convolutional(v) => {
                let d = v[0].len();
                if let Some(bad) = v.iter().find(|u| u.len() != d) {
                    return Err(Error::ShapeMismatch(format!("layer of length {} in a width-{d} network", bad.len())));
                }
            }
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    fn check_kind(&self, kind: ArchKind) -> Result<()> {
        if self.kind() != kind {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                kind.name(),
                self.kind().name()
            )));
        }
        self.validate()
    }

    /// All entries in layer order (column-major within FC matrices).
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            NetworkParams::FullyConnected(m) => m.iter().flat_map(|u| u.as_slice().iter().copied()).collect(),
            NetworkParams::Diagonal(v) | NetworkParams::Convolutional(v) => v.iter().flatten().copied().collect(),
        }
    }

    /// Same shapes as `self`, entries taken from `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let mut it = flat.iter().copied();
        match self {
            NetworkParams::FullyConnected(m) => NetworkParams::FullyConnected(
                m.iter().map(|u| DMatrix::from_iterator(u.nrows(), u.ncols(), it.by_ref().take(u.len()))).collect(),
            ),
            NetworkParams::Diagonal(v) => {
                NetworkParams::Diagonal(v.iter().map(|u| it.by_ref().take(u.len()).collect()).collect())
            }
            NetworkParams::Convolutional(v) => {
                NetworkParams::Convolutional(v.iter().map(|u| it.by_ref().take(u.len()).collect()).collect())
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let flat: Vec<f64> = self.flatten().into_iter().map(f).collect();
        self.with_flat(&flat)
    }

    pub fn norm_sq(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        spectral::dot(&self.flatten(), &other.flatten())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        let a = self.flatten();
        let b = other.flatten();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        self.with_flat(&sum)
    }

    /// Multiply layer `l` (0-based) by `c`.
    pub fn scale_layer(&self, l: usize, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            NetworkParams::FullyConnected(m) => m[l] *= c,
            NetworkParams::Diagonal(v) | NetworkParams::Convolutional(v) => v[l].iter_mut().for_each(|x| *x *= c),
        }
        out
    }
}

/// A linear predictor and its unitary DFT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub w: Vec<f64>,
    pub w_hat: ComplexVec,
}

impl Predictor {
    pub fn new(w: Vec<f64>) -> Self {
        let w_hat = dft(&w);
        Self { w, w_hat }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm(&self) -> f64 {
        spectral::norm(&self.w)
    }

    pub fn direction(&self) -> Vec<f64> {
        let n = self.norm();
        self.w.iter().map(|v| v / n).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { w: self.w.iter().map(|v| v * s).collect(), w_hat: self.w_hat.scale(s) }
    }

    /// `‖ŵ‖_1`.
    pub fn fourier_l1(&self) -> f64 {
        self.w_hat.l1_norm()
    }
}

/// Complex diagonal network: the Fourier image of a convolutional net.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierParams(pub Vec<ComplexVec>);

impl FourierParams {
    /// `⊙_l û_l`.
    pub fn predictor_hat(&self) -> ComplexVec {
        let mut out = ComplexVec::ones(self.0[0].len());
        for u in &self.0 {
            out = out.hadamard(u);
        }
        out
    }

    /// `∇_{û_l}` of `Re⟨ĝ-weighted loss⟩`: `ĝ ⊙ conj(⊙_{l'≠l} û_{l'})`, where `ĝ` is the
    /// DFT of `∇_w L`.
    pub fn grad(&self, g_hat: &ComplexVec) -> Vec<ComplexVec> {
        (0..self.0.len())
            .map(|l| {
                let mut others = ComplexVec::ones(g_hat.len());
                for (k, u) in self.0.iter().enumerate() {
                    if k != l {
                        others = others.hadamard(u);
                    }
                }
                g_hat.hadamard(&others.conj())
            })
            .collect()
    }

    pub fn step(&self, eta: f64, grads: &[ComplexVec]) -> Self {
        Self(self.0.iter().zip(grads).map(|(u, g)| u.add_scaled(-eta, g)).collect())
    }
}

/// `P_full(u) = u_1 u_2 ⋯ u_L` read as a `D`-vector.
pub fn predictor_full(params: &NetworkParams) -> Result<Predictor> {
    params.check_kind(ArchKind::FullyConnected)?;
    let NetworkParams::FullyConnected(m) = params else { unreachable!() };
    let mut prod = m[0].clone();
    for u in &m[1..] {
        prod = &prod * u;
    }
    Ok(Predictor::new(prod.column(0).iter().copied().collect()))
}

/// `P_conv(u) = ((((u_L↓ ⋆ u_{L-1}) ⋆ u_{L-2}) ⋯) ⋆ u_1)↓`.
pub fn predictor_conv(params: &NetworkParams) -> Result<Predictor> {
    params.check_kind(ArchKind::Convolutional)?;
    let NetworkParams::Convolutional(u) = params else { unreachable!() };
    let depth = u.len();
    let mut acc = flip(&u[depth - 1]);
    for layer in u[..depth - 1].iter().rev() {
        acc = circ_cross_correlate(&acc, layer)?;
    }
    Ok(Predictor::new(flip(&acc)))
}

/// `P_diag(u)[d] = Π_l u_l[d]`.
pub fn predictor_diag(params: &NetworkParams) -> Result<Predictor> {
    params.check_kind(ArchKind::Diagonal)?;
    let NetworkParams::Diagonal(u) = params else { unreachable!() };
    let w = (0..u[0].len()).map(|d| u.iter().map(|layer| layer[d]).product()).collect();
    Ok(Predictor::new(w))
}

pub fn predictor(params: &NetworkParams) -> Result<Predictor> {
    match params.kind() {
        ArchKind::FullyConnected => predictor_full(params),
        ArchKind::Diagonal => predictor_diag(params),
        ArchKind::Convolutional => predictor_conv(params),
    }
}

/// `[dft(u_l)]_l`; `dft(P_conv(u)) = ⊙_l dft(u_l)`.
pub fn fourier_factorization(params: &NetworkParams) -> Result<FourierParams> {
    params.check_kind(ArchKind::Convolutional)?;
    let NetworkParams::Convolutional(u) = params else { unreachable!() };
    Ok(FourierParams(u.iter().map(|layer| dft(layer)).collect()))
}

/// Jacobian-transpose action `∇_u P(u) · w_grad`.
///
/// Computed as the parameter gradient of the network output `f_u(w_grad) =
/// ⟨w_grad, P(u)⟩` by reverse-mode through the layers.
pub fn grad_params(params: &NetworkParams, w_grad: &[f64]) -> Result<NetworkParams> {
    params.validate()?;
    let dim = params.dim();
    if w_grad.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: w_grad.len() });
    }
    match params {
        NetworkParams::FullyConnected(m) => {
            let depth = m.len();
            // forward: h_0 = g, h_l = u_lᵀ h_{l-1}
            let mut hidden = Vec::with_capacity(depth);
            let mut h = nalgebra::DVector::from_column_slice(w_grad);
            for u in m {
                let next = u.tr_mul(&h);
                hidden.push(h);
                h = next;
            }
            let mut grads = vec![DMatrix::zeros(0, 0); depth];
            let mut delta = nalgebra::DVector::from_element(1, 1.0);
            for l in (0..depth).rev() {
                grads[l] = &hidden[l] * delta.transpose();
                delta = &m[l] * &delta;
            }
            Ok(NetworkParams::FullyConnected(grads))
        }
        NetworkParams::Convolutional(u) => {
            let depth = u.len();
            let mut hidden = Vec::with_capacity(depth);
            let mut h = w_grad.to_vec();
            for layer in &u[..depth - 1] {
                let next = circ_cross_correlate(&h, layer)?;
                hidden.push(h);
                h = next;
            }
            hidden.push(h);
            let mut grads = vec![Vec::new(); depth];
            grads[depth - 1] = hidden[depth - 1].clone();
            let mut delta = u[depth - 1].clone();
            for l in (0..depth - 1).rev() {
                grads[l] = circ_cross_correlate(&hidden[l], &delta)?;
                delta = circ_correlate_adjoint(&delta, &u[l])?;
            }
            Ok(NetworkParams::Convolutional(grads))
        }
        NetworkParams::Diagonal(u) => {
            let grads = (0..u.len())
                .map(|l| {
                    (0..dim)
                        .map(|d| {
                            w_grad[d]
                                * u.iter()
                                    .enumerate()
                                    .filter(|&(k, _)| k != l)
                                    .map(|(_, layer)| layer[d])
                                    .product::<f64>()
                        })
                        .collect()
                })
                .collect();
            Ok(NetworkParams::Diagonal(grads))
        }
    }
}

/// `R_P(w) = min { ‖u‖² : P(u) = w }` in closed form.
///
/// Fully connected: `L ‖w‖_2^{2/L}`; diagonal: `L Σ_d |w[d]|^{2/L}`;
/// convolutional: `L Σ_d |ŵ[d]|^{2/L}`.
pub fn rp_closed_form(arch: &Architecture, w: &Predictor) -> Result<f64> {
    if w.norm() == 0.0 {
        return Err(Error::ZeroPredictor);
    }
    let depth = arch.depth as f64;
    let p = 2.0 / depth;
    Ok(match arch.kind {
        ArchKind::FullyConnected => depth * w.norm().powf(p),
        ArchKind::Diagonal => depth * ComplexVec::from_real(&w.w).pow_sum(p),
        ArchKind::Convolutional => depth * w.w_hat.pow_sum(p),
    })
}

/// Parameters with `P(u) = w` and `‖u‖² = R_P(w)`.
pub fn balanced_factorization(arch: &Architecture, w: &Predictor) -> Result<NetworkParams> {
    arch.validate()?;
    if w.dim() != arch.dim() {
        return Err(Error::DimensionMismatch { expected: arch.dim(), got: w.dim() });
    }
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::ZeroPredictor);
    }
    let depth = arch.depth;
    let root = |m: f64| if m < 1e-14 { 0.0 } else { m.powf(1.0 / depth as f64) };
    match arch.kind {
        ArchKind::FullyConnected => {
            // ū_l = ‖w‖^{1/L} z_{l-1} z_lᵀ with z_0 = w/‖w‖, z_l = e_0, z_L = [1].
            let scale = norm.powf(1.0 / depth as f64);
            let widths = &arch.layer_widths;
            let layers = (0..depth)
                .map(|l| {
                    let mut u = DMatrix::zeros(widths[l], widths[l + 1]);
                    if l == 0 {
                        for (d, wd) in w.w.iter().enumerate() {
                            u[(d, 0)] = scale * wd / norm;
                        }
                    } else {
                        u[(0, 0)] = scale;
                    }
                    u
                })
                .collect();
            Ok(NetworkParams::FullyConnected(layers))
        }
        ArchKind::Diagonal => {
            let layers = (0..depth)
                .map(|l| {
                    w.w.iter()
                        .map(|&wd| {
                            let r = root(wd.abs());
                            if l == 0 {
                                r * wd.signum()
                            } else {
                                r
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(NetworkParams::Diagonal(layers))
        }
        ArchKind::Convolutional => {
            let n = w.dim();
            let mut layers = Vec::with_capacity(depth);
            for l in 0..depth {
                let mut hat = ComplexVec::zeros(n);
                for d in 0..n {
                    let m = w.w_hat.abs(d);
                    let r = root(m);
                    if r == 0.0 {
                        continue;
                    }
                    if l == 0 {
                        let phi = w.w_hat.phase(d);
                        hat.re[d] = r * phi.cos();
                        hat.im[d] = r * phi.sin();
                    } else {
                        hat.re[d] = r;
                    }
                }
                let full = spectral::idft_complex(&hat);
                let imag = full.im.iter().map(|v| v * v).sum::<f64>().sqrt();
                if imag > spectral::IMAG_TOL * hat.norm().max(1.0) {
                    return Err(Error::PhaseSymmetryViolation(imag));
                }
                layers.push(full.re);
            }
            Ok(NetworkParams::Convolutional(layers))
        }
    }
}

/// I.i.d. Gaussian initialization; layer `l` uses standard deviation
/// `init_scale / √(fan-in)`.
pub fn init_params(arch: &Architecture, init_scale: f64, seed: u64) -> Result<NetworkParams> {
    arch.validate()?;
    let mut rng = SplitMix64::stream(seed, 0x1a7e5);
    let dim = arch.dim();
    Ok(match arch.kind {
        ArchKind::FullyConnected => NetworkParams::FullyConnected(
            arch.layer_widths
                .windows(2)
                .map(|w| {
                    let sd = init_scale / (w[0] as f64).sqrt();
                    // row-major draw order
                    let vals = rng.normal_vec(w[0] * w[1], sd);
                    DMatrix::from_row_slice(w[0], w[1], &vals)
                })
                .collect(),
        ),
        ArchKind::Diagonal | ArchKind::Convolutional => {
            let sd = init_scale / (dim as f64).sqrt();
            let layers = (0..arch.depth).map(|_| rng.normal_vec(dim, sd)).collect();
            if arch.kind == ArchKind::Diagonal {
                NetworkParams::Diagonal(layers)
            } else {
                NetworkParams::Convolutional(layers)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_vec(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
        rng.normal_vec(n, 1.0)
    }

    #[test]
    fn depth_one_maps_are_identity() {
        let v = vec![0.5, -1.0, 2.0];
        let fc = NetworkParams::FullyConnected(vec![DMatrix::from_column_slice(3, 1, &v)]);
        assert_eq!(predictor_full(&fc).unwrap().w, v);
        assert_eq!(predictor_conv(&NetworkParams::Convolutional(vec![v.clone()])).unwrap().w, v);
        assert_eq!(predictor_diag(&NetworkParams::Diagonal(vec![v.clone()])).unwrap().w, v);
    }

    #[test]
    fn identity_first_layer_passes_through() {
        let v = vec![1.0, 2.0, -3.0];
        let fc = NetworkParams::FullyConnected(vec![DMatrix::identity(3, 3), DMatrix::from_column_slice(3, 1, &v)]);
        assert_eq!(predictor_full(&fc).unwrap().w, v);
    }

    #[test]
    fn fc_product_matches_nested_loops() {
        let mut rng = SplitMix64::new(11);
        let widths = [4, 3, 2, 1];
        let mats: Vec<DMatrix<f64>> =
            widths.windows(2).map(|w| DMatrix::from_row_slice(w[0], w[1], &rand_vec(&mut rng, w[0] * w[1]))).collect();
        let mut expected = vec![0.0; 4];
        for (i, e) in expected.iter_mut().enumerate() {
            for j in 0..3 {
                for k in 0..2 {
                    *e += mats[0][(i, j)] * mats[1][(j, k)] * mats[2][(k, 0)];
                }
            }
        }
        let w = predictor_full(&NetworkParams::FullyConnected(mats)).unwrap().w;
        for (a, b) in w.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn conv_delta_filter_passes_input() {
        let d = 5;
        let mut delta = vec![0.0; d];
        delta[0] = (d as f64).sqrt();
        let u2 = vec![0.3, 1.0, -2.0, 0.4, 0.9];
        let w = predictor_conv(&NetworkParams::Convolutional(vec![delta, u2.clone()])).unwrap().w;
        for (a, b) in w.iter().zip(&u2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    /// Layered forward pass `((x ⋆ u_1) ⋯ ⋆ u_{L-1})ᵀ u_L`.
    fn conv_forward(u: &[Vec<f64>], x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        for layer in &u[..u.len() - 1] {
            h = circ_cross_correlate(&h, layer).unwrap();
        }
        spectral::dot(&h, &u[u.len() - 1])
    }

    #[test]
    fn conv_predictor_matches_forward_pass() {
        let mut rng = SplitMix64::new(3);
        let u: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 4)).collect();
        let w = predictor_conv(&NetworkParams::Convolutional(u.clone())).unwrap().w;
        for _ in 0..10 {
            let x = rand_vec(&mut rng, 4);
            let direct = conv_forward(&u, &x);
            let via_w = spectral::dot(&x, &w);
            assert!((direct - via_w).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn diag_product_examples() {
        let mut rng = SplitMix64::new(5);
        let u: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 4)).collect();
        let w = predictor_diag(&NetworkParams::Diagonal(u.clone())).unwrap().w;
        for d in 0..4 {
            assert_eq!(w[d], u[0][d] * u[1][d] * u[2][d]);
        }
        let mut with_ones = u.clone();
        with_ones[1] = vec![1.0; 4];
        let w1 = predictor_diag(&NetworkParams::Diagonal(with_ones)).unwrap().w;
        for d in 0..4 {
            assert!((w1[d] - u[0][d] * u[2][d]).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let bad = NetworkParams::FullyConnected(vec![DMatrix::zeros(3, 2), DMatrix::zeros(3, 1)]);
        assert!(matches!(predictor_full(&bad), Err(Error::ShapeMismatch(_))));
        let ragged = NetworkParams::Convolutional(vec![vec![1.0; 3], vec![1.0; 2]]);
        assert!(matches!(predictor_conv(&ragged), Err(Error::ShapeMismatch(_))));
        let wrong_kind = NetworkParams::Diagonal(vec![vec![1.0; 3]]);
        assert!(matches!(predictor_conv(&wrong_kind), Err(Error::ShapeMismatch(_))));
        assert!(grad_params(&wrong_kind, &[1.0; 2]).is_err());
    }

    #[test]
    fn fourier_factorization_examples() {
        let d = 4;
        let mut delta = vec![0.0; d];
        delta[0] = 2.0;
        let u2 = vec![1.0, -0.5, 0.25, 3.0];
        let f = fourier_factorization(&NetworkParams::Convolutional(vec![delta, u2.clone()])).unwrap();
        assert!(f.0[0].max_abs_diff(&ComplexVec::ones(d)) < 1e-15);
        assert!(f.predictor_hat().max_abs_diff(&dft(&u2)) < 1e-14);

        let mut rng = SplitMix64::new(8);
        let u: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 8)).collect();
        let params = NetworkParams::Convolutional(u);
        let lhs = predictor_conv(&params).unwrap().w_hat;
        let rhs = fourier_factorization(&params).unwrap().predictor_hat();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn fc_depth_one_gradient_is_identity() {
        let g = vec![0.1, -0.2, 0.3];
        let p = NetworkParams::FullyConnected(vec![DMatrix::from_column_slice(3, 1, &[5.0, 6.0, 7.0])]);
        assert_eq!(grad_params(&p, &g).unwrap().flatten(), g);
    }

    #[test]
    fn zero_w_grad_gives_zero_gradient() {
        for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
            let p = init_params(&Architecture::new(kind, 4, 3), 1.0, 1).unwrap();
            assert!(grad_params(&p, &[0.0; 4]).unwrap().flatten().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn homogeneity_degree_is_depth() {
        assert_eq!(homogeneity_degree(&Architecture::fully_connected(4, 3)), 3);
        assert_eq!(homogeneity_degree(&Architecture::convolutional(4, 2)), 2);
    }

    #[test]
    fn rp_closed_form_examples() {
        let w = Predictor::new(vec![3.0, 0.0, 0.0]);
        assert!((rp_closed_form(&Architecture::fully_connected(3, 2), &w).unwrap() - 6.0).abs() < 1e-12);
        let e0 = Predictor::new(vec![1.0, 0.0, 0.0, 0.0]);
        assert!((rp_closed_form(&Architecture::diagonal(4, 3), &e0).unwrap() - 3.0).abs() < 1e-12);
        let zero = Predictor::new(vec![0.0; 3]);
        assert!(matches!(rp_closed_form(&Architecture::diagonal(3, 2), &zero), Err(Error::ZeroPredictor)));
    }

    #[test]
    fn balanced_factorization_examples() {
        let w = Predictor::new(vec![4.0, 0.0]);
        let u = balanced_factorization(&Architecture::diagonal(2, 2), &w).unwrap();
        assert_eq!(u, NetworkParams::Diagonal(vec![vec![2.0, 0.0], vec![2.0, 0.0]]));
        assert!((u.norm_sq() - 8.0).abs() < 1e-12);

        let w9 = Predictor::new(vec![9.0, 0.0, 0.0]);
        let arch = Architecture::fully_connected_with_widths(vec![3, 1, 1]).unwrap();
        let u = balanced_factorization(&arch, &w9).unwrap();
        assert!((u.norm_sq() - 18.0).abs() < 1e-12);
        assert_eq!(predictor_full(&u).unwrap().w, w9.w);
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::fully_connected_with_widths(vec![3, 2, 2]).is_err());
        assert!(Architecture::fully_connected_with_widths(vec![3]).is_err());
        assert!(Architecture::fully_connected_with_widths(vec![3, 2, 1]).is_ok());
        assert_eq!(
            init_params(&Architecture::fully_connected(4, 3), 0.1, 2).unwrap().architecture(),
            Architecture::fully_connected(4, 3)
        );
    }
}
