//! First eigenpair of the Robin Laplacian `−Δφ = λφ`, `∂νφ + αφ = 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{dot, Field, Grid};
use crate::linalg::solve_symmetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// ‖φ1‖_{L²} = 1
    L2Unit,
    /// ∫_Ω φ1 dx = 1
    L1Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: Field,
    pub normalization: Normalization,
}

impl EigenPair {
    /// Same eigenfunction rescaled to another normalization.
    pub fn renormalized(&self, normalization: Normalization) -> EigenPair {
        EigenPair {
            lambda1: self.lambda1,
            phi1: normalize(&self.phi1, normalization),
            normalization,
        }
    }
}

/// Spectral shift of the inverse iteration; below every eigenvalue since λ ≥ 0.
const SHIFT: f64 = -1.0;
const DEFAULT_MAX_ITER: usize = 10_000;

/// Smallest eigenvalue of the discrete Robin Laplacian with its positive
/// eigenvector, by shifted inverse power iteration from the constant vector.
pub fn robin_eigenpair(grid: &Arc<Grid>, alpha: f64, normalization: Normalization) -> Result<EigenPair> {
    robin_eigenpair_from(grid, alpha, normalization, &vec![1.0; grid.len()], DEFAULT_MAX_ITER)
}

pub fn robin_eigenpair_from(
    grid: &Arc<Grid>,
    alpha: f64,
    normalization: Normalization,
    start: &[f64],
    max_iter: usize,
) -> Result<EigenPair> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("Robin coefficient must be ≥ 0, got {alpha}")));
    }
    if start.len() != grid.len() {
        return Err(Error::GridMismatch("start vector length differs from grid".into()));
    }
    if alpha == 0.0 {
        // Neumann: constants span the kernel of the stiffness exactly
        return finish(grid, 0.0, vec![1.0; grid.len()], normalization);
    }
    let w = grid.interior_weights();
    let bw = grid.boundary_weights();
    let robin_diag: Vec<f64> = bw.iter().map(|b| alpha * b).collect();
    let shifted_diag: Vec<f64> = robin_diag.iter().zip(w).map(|(r, w)| r - SHIFT * w).collect();

    // rounding floor of the residual: entries of W⁻¹(K + α bw) times ε
    let op_scale = grid
        .stiffness_diagonal()
        .iter()
        .zip(&robin_diag)
        .zip(w)
        .fold(0.0f64, |m, ((k, r), w)| m.max((k + r) / w));
    let mut x = start.to_vec();
    w_normalize(&mut x, w);
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..max_iter {
        let (lambda, res) = rayleigh_residual(grid, &robin_diag, &x);
        let floor = 64.0 * f64::EPSILON * op_scale * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = 1e-11 * (1.0 + lambda);
        let accept = res <= target || (stalled >= 5 && res <= floor.max(1e-9 * (1.0 + lambda)));
        if accept && it > 0 {
            return finish(grid, lambda, x, normalization);
        }
        if res < 0.9 * best {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let rhs: Vec<f64> = x.iter().zip(w).map(|(x, w)| x * w).collect();
        let mut y = solve_symmetric(grid, 1.0, &shifted_diag, &rhs, Some(&x))?;
        if y.iter().sum::<f64>() < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        w_normalize(&mut y, w);
        x = y;
    }
    let (_, res) = rayleigh_residual(grid, &robin_diag, &x);
    Err(Error::Convergence { what: "inverse power iteration", iterations: max_iter, residual: res })
}

fn finish(grid: &Arc<Grid>, lambda: f64, x: Vec<f64>, normalization: Normalization) -> Result<EigenPair> {
    if let Some(v) = x.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Convergence {
            what: "inverse power iteration (eigenvector not positive)",
            iterations: 0,
            residual: *v,
        });
    }
    let phi = Field::new(grid.clone(), x)?;
    Ok(EigenPair { lambda1: lambda.max(0.0), phi1: normalize(&phi, normalization), normalization })
}

/// Rayleigh quotient and sup-norm residual `‖−Δ_h x − λx‖∞` of a W-normalized vector.
fn rayleigh_residual(grid: &Grid, robin_diag: &[f64], x: &[f64]) -> (f64, f64) {
    let mut bx = vec![0.0; x.len()];
    grid.apply_stiffness(x, &mut bx);
    for (k, v) in bx.iter_mut().enumerate() {
        *v += robin_diag[k] * x[k];
    }
    let w = grid.interior_weights();
    let lambda = dot(x, &bx) / x.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>();
    let res = bx
        .iter()
        .zip(x)
        .zip(w)
        .fold(0.0f64, |m, ((b, x), w)| m.max((b / w - lambda * x).abs()));
    (lambda, res)
}

fn w_normalize(x: &mut [f64], w: &[f64]) {
    let s = x.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= s);
}

fn normalize(phi: &Field, normalization: Normalization) -> Field {
    let s = match normalization {
        Normalization::L2Unit => phi.l2_norm(),
        Normalization::L1Unit => phi.integrate_interior(),
    }
    .expect("eigenfunction is finite");
    phi.scale(1.0 / s)
}

/// Minimum of φ1 over all nodes, boundary included; strictly positive for a valid pair.
pub fn hopf_floor(pair: &EigenPair) -> f64 {
    pair.phi1.min()
}
