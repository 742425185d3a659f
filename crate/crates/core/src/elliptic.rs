//! Elliptic solves behind the stationary fixed-point map Ψ:
//!
//! ```text
//! −Δv1 + b v1 = u1 u2,   ∂ν v1 + α v1 = 0
//! −Δv2        = a u1,    ∂ν v2 + β |v2|^(γ−2) v2 = 0
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, StatePair};
use crate::linalg::solve_symmetric;
use crate::params::{Params, SolverOptions};

/// Levenberg damping added to boundary rows of the Newton Jacobian.
const LEVENBERG_MU: f64 = 1e-8;

fn check_source(grid: &Arc<Grid>, f: &Field) -> Result<()> {
    if f.grid().as_ref() != grid.as_ref() {
        return Err(Error::GridMismatch("source field lives on another grid".into()));
    }
    if !f.is_finite() {
        return Err(Error::domain("source field has non-finite values"));
    }
    Ok(())
}

fn weighted(grid: &Grid, f: &[f64]) -> Vec<f64> {
    f.iter().zip(grid.interior_weights()).map(|(f, w)| f * w).collect()
}

/// Solves `−Δ_h v + c v = f` with `∂ν v + α v = 0`.
///
/// For `c = α = 0` the pure Neumann problem is solvable only for zero-mean
/// `f`; the zero-mean solution is returned.
pub fn solve_linear_robin(grid: &Arc<Grid>, c: f64, alpha: f64, f: &Field) -> Result<Field> {
    if !(c >= 0.0 && c.is_finite()) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("need c ≥ 0 and alpha ≥ 0, got c={c}, alpha={alpha}")));
    }
    check_source(grid, f)?;
    let rhs = weighted(grid, f.values());
    if c == 0.0 && alpha == 0.0 {
        let mean: f64 = rhs.iter().sum();
        let mass: f64 = rhs.iter().map(|v| v.abs()).sum();
        if mean.abs() > 1e-12 * mass.max(f64::MIN_POSITIVE) {
            return Err(Error::Solvability(format!(
                "pure Neumann problem with source of nonzero mean {:e}",
                mean / grid.measure()
            )));
        }
        let mut v = solve_symmetric(grid, 1.0, &vec![0.0; grid.len()], &rhs, None)?;
        let shift = weighted(grid, &v).iter().sum::<f64>() / grid.measure();
        v.iter_mut().for_each(|x| *x -= shift);
        return Ok(Field::from_raw(grid.clone(), v));
    }
    let d: Vec<f64> = grid
        .interior_weights()
        .iter()
        .zip(grid.boundary_weights())
        .map(|(w, b)| c * w + alpha * b)
        .collect();
    let v = solve_symmetric(grid, 1.0, &d, &rhs, None)?;
    Ok(Field::from_raw(grid.clone(), v))
}

/// Boundary flux `β |v|^(γ−2) v` evaluated at the clipped value `max(v, 0)`.
#[inline]
pub(crate) fn power_flux(beta: f64, gamma: f64, v: f64) -> f64 {
    let v = v.max(0.0);
    if gamma == 2.0 {
        beta * v
    } else {
        beta * v.powf(gamma - 1.0)
    }
}

#[inline]
pub(crate) fn power_flux_derivative(beta: f64, gamma: f64, v: f64) -> f64 {
    let v = v.max(0.0);
    if gamma == 2.0 {
        beta
    } else {
        beta * (gamma - 1.0) * v.powf(gamma - 2.0)
    }
}

/// Convergence record of a Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub solution: Field,
    pub iterations: usize,
    /// Sup-norm of the nodal residual after each iterate, starting with the initial guess.
    pub residuals: Vec<f64>,
}

/// The nonlinear-flux problem `θ K v + diag(m) v + θ bw ⊙ β g(v) = rhs`,
/// shared by the stationary solve (`θ = 1`, `m = 0`) and the implicit time
/// step (`θ = dt`, `m = w`).
pub(crate) struct PowerBcProblem<'a> {
    pub grid: &'a Grid,
    pub theta: f64,
    pub mass: &'a [f64],
    pub beta: f64,
    pub gamma: f64,
    pub rhs: &'a [f64],
}

impl PowerBcProblem<'_> {
    /// Residual and a per-node magnitude scale for relative convergence tests.
    fn residual(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let g = self.grid;
        let mut kv = vec![0.0; v.len()];
        g.apply_stiffness(v, &mut kv);
        let kd = g.stiffness_diagonal();
        let bw = g.boundary_weights();
        let mut scale = 0.0f64;
        let r = (0..v.len())
            .map(|k| {
                let flux = self.theta * bw[k] * power_flux(self.beta, self.gamma, v[k]);
                let mass = self.mass[k] * v[k];
                let s = 2.0 * self.theta * kd[k] * v[k].abs() + flux.abs() + mass.abs() + self.rhs[k].abs();
                scale = scale.max(s);
                self.theta * kv[k] + mass + flux - self.rhs[k]
            })
            .collect();
        (r, scale)
    }

    pub fn solve(&self, guess: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let bw = g.boundary_weights();
        let mut v = guess;
        let (mut r, mut scale) = self.residual(&v);
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut history = vec![norm(&r)];
        for _ in 0..max_iter {
            let rn = norm(&r);
            if rn <= tol * scale || rn == 0.0 {
                return Ok((v, history));
            }
            let d: Vec<f64> = (0..v.len())
                .map(|k| {
                    let jb = if bw[k] > 0.0 {
                        self.theta * bw[k] * (power_flux_derivative(self.beta, self.gamma, v[k]) + LEVENBERG_MU)
                    } else {
                        0.0
                    };
                    self.mass[k] + jb
                })
                .collect();
            let delta = solve_symmetric(g, self.theta, &d, &r, None)?;
            // backtracking on the residual keeps the iteration monotone far from the root
            let mut step = 1.0;
            let (mut trial, mut tr, mut ts);
            loop {
                trial = v.iter().zip(&delta).map(|(v, d)| v - step * d).collect::<Vec<_>>();
                (tr, ts) = self.residual(&trial);
                if norm(&tr) < rn || step < 1e-4 {
                    break;
                }
                step *= 0.5;
            }
            let dmax = norm(&delta) * step;
            let vmax = norm(&trial);
            v = trial;
            r = tr;
            scale = ts;
            history.push(norm(&r));
            if dmax <= 4.0 * f64::EPSILON * (1.0 + vmax) {
                return Ok((v, history));
            }
        }
        let rn = norm(&r);
        if rn <= tol * scale {
            return Ok((v, history));
        }
        Err(Error::Convergence { what: "Newton (power-law boundary)", iterations: max_iter, residual: rn })
    }
}

/// Solves `−Δ_h v = f` with `∂ν v + β |v|^(γ−2) v = 0` for nonnegative `f`.
pub fn solve_poisson_nonlinear_bc(
    grid: &Arc<Grid>,
    beta: f64,
    gamma: f64,
    f: &Field,
    options: &SolverOptions,
) -> Result<Field> {
    Ok(solve_poisson_nonlinear_bc_report(grid, beta, gamma, f, options)?.solution)
}

pub fn solve_poisson_nonlinear_bc_report(
    grid: &Arc<Grid>,
    beta: f64,
    gamma: f64,
    f: &Field,
    options: &SolverOptions,
) -> Result<NewtonReport> {
    if !(beta > 0.0 && beta.is_finite()) || !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("need beta > 0 and gamma ≥ 2, got beta={beta}, gamma={gamma}")));
    }
    check_source(grid, f)?;
    if f.min() < 0.0 {
        return Err(Error::domain(format!("source must be nonnegative, min is {}", f.min())));
    }
    let guess = solve_linear_robin(grid, 0.0, beta, f)?.into_values();
    let rhs = weighted(grid, f.values());
    let zero_mass = vec![0.0; grid.len()];
    let problem = PowerBcProblem { grid, theta: 1.0, mass: &zero_mass, beta, gamma, rhs: &rhs };
    let (v, history) = problem.solve(guess, options.newton_tol, options.max_iter)?;
    let pde_scale = grid.interior_weights().iter().fold(f64::INFINITY, |m, &w| m.min(w));
    Ok(NewtonReport {
        iterations: history.len() - 1,
        residuals: history.iter().map(|r| r / pde_scale).collect(),
        solution: Field::from_raw(grid.clone(), v),
    })
}

/// Nodewise residual of `∂ν v + r(v) = 0` at boundary nodes, using the
/// ghost-node normal derivative: the boundary row of `−Δ_h v − f` scaled by `w/bw`.
pub fn boundary_relation_residual(v: &Field, f: &Field, flux: impl Fn(f64) -> f64) -> f64 {
    let g = v.grid();
    let lap = g.neg_laplacian(v.values(), flux);
    g.boundary_nodes()
        .iter()
        .map(|&k| ((lap[k] - f.values()[k]) / g.flux_factor(k)).abs())
        .fold(0.0, f64::max)
}

/// `Ψ(u) = (v1, v2)`: the two elliptic solves whose fixed points are stationary states.
pub fn psi_map(params: &Params, u: &StatePair, options: &SolverOptions) -> Result<StatePair> {
    let grid = u.grid();
    let tol = 1e-12 * (1.0 + u.sup_abs());
    if u.u1.min() < -tol || u.u2.min() < -tol {
        return Err(Error::domain("Ψ is defined on nonnegative pairs"));
    }
    let u1 = u.u1.map(|v| v.max(0.0));
    let u2 = u.u2.map(|v| v.max(0.0));
    let v1 = solve_linear_robin(grid, params.b(), params.alpha(), &u1.zip_map(&u2, |a, b| a * b))?;
    let v2 = solve_poisson_nonlinear_bc(grid, params.beta(), params.gamma(), &u1.scale(params.a()), options)?;
    Ok(StatePair { u1: v1, u2: v2, t: u.t })
}

/// Second component of Ψ alone: the temperature generated by a neutron density.
pub fn temperature_of(params: &Params, u1: &Field, options: &SolverOptions) -> Result<Field> {
    let f = u1.map(|v| params.a() * v.max(0.0));
    solve_poisson_nonlinear_bc(u1.grid(), params.beta(), params.gamma(), &f, options)
}
