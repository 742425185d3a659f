//! Positive stationary solutions and the ordered-uniqueness check.

use std::sync::Arc;

use crate::elliptic::{power_flux, power_flux_derivative, psi_map, solve_linear_robin, temperature_of};
use crate::error::{Error, Result};
use crate::grid::{dot, Field, Grid, StatePair};
use crate::linalg::BandMatrix;
use crate::params::{Params, SolverOptions};
use crate::spectral::{robin_eigenpair, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    Picard,
    PicardThenNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Positive,
    TrivialZero,
    Failed,
}

#[derive(Debug, Clone)]
pub struct SteadyResult {
    pub state: StatePair,
    pub residual: f64,
    pub iterations: usize,
    pub method: SteadyMethod,
    pub classification: Classification,
}

impl SteadyResult {
    pub fn is_positive(&self) -> bool {
        self.classification == Classification::Positive
    }
}

/// Picard stops and hands over to Newton at this relative Ψ-residual.
pub const PICARD_TOL: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 60;
const POSITIVITY_FLOOR: f64 = 1e-10;

/// Seeds with `seed_scale·φ1` (L²-normalized Robin eigenfunction) and the
/// temperature it generates, then iterates to a stationary state.
pub fn find_positive_steady(
    grid: &Arc<Grid>,
    params: &Params,
    seed_scale: f64,
    options: &SolverOptions,
) -> Result<SteadyResult> {
    if !(seed_scale >= 0.0 && seed_scale.is_finite()) {
        return Err(Error::domain(format!("seed_scale must be ≥ 0, got {seed_scale}")));
    }
    let phi = robin_eigenpair(grid, params.alpha(), Normalization::L2Unit)?.phi1;
    let u1 = phi.scale(seed_scale);
    let u2 = temperature_of(params, &u1, options)?;
    find_positive_steady_from(params, &StatePair { u1, u2, t: 0.0 }, options)
}

/// Same iteration from an arbitrary nonnegative seed.
pub fn find_positive_steady_from(params: &Params, seed: &StatePair, options: &SolverOptions) -> Result<SteadyResult> {
    options.validate()?;
    if seed.min() < 0.0 {
        return Err(Error::domain("steady seed must be nonnegative"));
    }
    if !params.existence_conditions_hold() {
        eprintln!(
            "warning: alpha={} beta={} gamma={} are outside gamma > 2 and (gamma = 2, alpha ≤ 2 beta); a positive steady state may not exist",
            params.alpha(),
            params.beta(),
            params.gamma()
        );
    }
    let grid = seed.grid().clone();
    if seed.u1.sup_abs() == 0.0 {
        // Ψ(0) = 0 and the u1 equation is linear homogeneous in u1
        let state = StatePair::zeros(&grid);
        let residual = steady_residual(params, &state);
        return Ok(SteadyResult {
            state,
            residual,
            iterations: 0,
            method: SteadyMethod::Picard,
            classification: Classification::TrivialZero,
        });
    }

    let (mut state, iterations) = picard(params, seed, options)?;
    let mut method = SteadyMethod::Picard;
    let mut residual = steady_residual(params, &state);
    if residual > options.tol_residual {
        method = SteadyMethod::PicardThenNewton;
        state = newton_steady(params, &state, options)?;
        residual = steady_residual(params, &state);
    }
    let classification = classify(&state, residual, options);
    Ok(SteadyResult { state, residual, iterations, method, classification })
}

fn classify(state: &StatePair, residual: f64, options: &SolverOptions) -> Classification {
    let norm = state.sup_abs();
    if norm <= options.decay_threshold {
        Classification::TrivialZero
    } else if residual <= options.tol_residual
        && state.u1.min() > POSITIVITY_FLOOR * norm
        && state.u2.min() > POSITIVITY_FLOOR * norm
    {
        Classification::Positive
    } else {
        Classification::Failed
    }
}

/// Relaxed Picard on the neutron shape with the temperature slaved to it.
///
/// The positive fixed point of Ψ repels along the amplitude direction
/// (scaling up u1 raises u2 and with it the growth rate), so each sweep first
/// rescales u1 onto the level set where the φ1-projection of the u1 equation
/// balances, then relaxes the shape towards Ψ1.
fn picard(params: &Params, seed: &StatePair, options: &SolverOptions) -> Result<(StatePair, usize)> {
    let grid = seed.grid().clone();
    let pair = robin_eigenpair(&grid, params.alpha(), Normalization::L2Unit)?;
    let w = grid.interior_weights();
    let phi_w: Vec<f64> = pair.phi1.values().iter().zip(w).map(|(p, w)| p * w).collect();
    let balance = params.b() + pair.lambda1;

    let mut shape = seed.u1.clone();
    let mut omega = options.relax_omega;
    let mut decreases = 0;
    let mut last = f64::INFINITY;
    for it in 0..options.max_iter {
        let s = amplitude(params, &shape, &phi_w, balance, options)?;
        let u1 = shape.scale(s);
        if u1.sup_abs() > options.blowup_threshold {
            return Err(Error::Divergence { norm: u1.sup_abs(), threshold: options.blowup_threshold });
        }
        let u2 = temperature_of(params, &u1, options)?;
        let v1 = solve_linear_robin(&grid, params.b(), params.alpha(), &u1.zip_map(&u2, |a, b| a * b))?;
        let norm = u1.sup_abs().max(u2.sup_abs());
        let res = v1.zip_map(&u1, |a, b| a - b).sup_abs() / (1.0 + norm);
        if res <= PICARD_TOL {
            return Ok((StatePair { u1, u2, t: 0.0 }, it + 1));
        }
        if res > last {
            omega *= 0.5;
            decreases = 0;
        } else {
            decreases += 1;
            if decreases >= 3 {
                omega = options.relax_omega;
            }
        }
        last = res;
        shape = u1.zip_map(&v1, |a, b| ((1.0 - omega) * a + omega * b).max(0.0));
    }
    Err(Error::Convergence { what: "relaxed Picard on Ψ", iterations: options.max_iter, residual: last })
}

/// Root `s > 0` of `⟨s·u1·S(a s u1), φ1⟩ = (b+λ1)⟨s·u1, φ1⟩`. The left side
/// over `s` increases from 0 with `S`, so the root is unique when it exists.
fn amplitude(params: &Params, shape: &Field, phi_w: &[f64], balance: f64, options: &SolverOptions) -> Result<f64> {
    let base = dot(shape.values(), phi_w);
    let g = |s: f64| -> Result<f64> {
        let u2 = temperature_of(params, &shape.scale(s), options)?;
        let prod: Vec<f64> = shape.values().iter().zip(u2.values()).map(|(a, b)| a * b).collect();
        Ok(dot(&prod, phi_w) - balance * base)
    };
    let (mut lo, mut glo) = (0.0, -balance * base);
    let mut hi = 1.0;
    let mut ghi = g(hi)?;
    let cap = options.blowup_threshold / shape.sup_abs().max(f64::MIN_POSITIVE);
    while ghi <= 0.0 {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Divergence { norm: hi * shape.sup_abs(), threshold: options.blowup_threshold });
        }
        ghi = g(hi)?;
    }
    // Illinois false position
    let mut side = 0;
    for _ in 0..200 {
        let s = (lo * ghi - hi * glo) / (ghi - glo);
        let gs = g(s)?;
        if gs == 0.0 || (hi - lo) <= 1e-14 * hi {
            return Ok(s);
        }
        if gs > 0.0 {
            hi = s;
            ghi = gs;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            glo = gs;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// W-weighted residuals of the two stationary equations at every node.
fn weighted_residual(params: &Params, u1: &[f64], u2: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let w = grid.interior_weights();
    let bw = grid.boundary_weights();
    let (mut k1, mut k2) = (vec![0.0; n], vec![0.0; n]);
    grid.apply_stiffness(u1, &mut k1);
    grid.apply_stiffness(u2, &mut k2);
    let r1 = (0..n)
        .map(|k| k1[k] + params.alpha() * bw[k] * u1[k] + w[k] * (params.b() * u1[k] - u1[k] * u2[k]))
        .collect();
    let r2 = (0..n)
        .map(|k| k2[k] + bw[k] * power_flux(params.beta(), params.gamma(), u2[k]) - w[k] * params.a() * u1[k])
        .collect();
    (r1, r2)
}

/// Max of the sup-norm PDE residuals at interior nodes and the sup-norm
/// boundary-condition residuals at boundary nodes, over both components.
pub fn steady_residual(params: &Params, state: &StatePair) -> f64 {
    let grid = state.grid();
    let (r1, r2) = weighted_residual(params, state.u1.values(), state.u2.values(), grid);
    let w = grid.interior_weights();
    let bw = grid.boundary_weights();
    (0..grid.len())
        .map(|k| {
            // boundary rows: (−Δ_h u − f)·w/bw is the ghost-node BC defect
            let scale = if bw[k] > 0.0 { bw[k] } else { w[k] };
            r1[k].abs().max(r2[k].abs()) / scale
        })
        .fold(0.0, f64::max)
}

/// Newton on the coupled stationary system, unknowns interleaved per node.
pub fn newton_steady(params: &Params, start: &StatePair, options: &SolverOptions) -> Result<StatePair> {
    let grid = start.grid().clone();
    let n = grid.len();
    let w = grid.interior_weights();
    let bw = grid.boundary_weights();
    let band = 2 * grid.bandwidth() + 1;
    let triplets = grid.stiffness_triplets();
    let (mut u1, mut u2) = (start.u1.values().to_vec(), start.u2.values().to_vec());
    let norm = |r1: &[f64], r2: &[f64]| r1.iter().chain(r2).fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut r1, mut r2) = weighted_residual(params, &u1, &u2, &grid);
    let mut rn = norm(&r1, &r2);
    let mut res = steady_residual(params, &StatePair::from_raw(&grid, &u1, &u2));
    let mut stalls = 0;
    for _ in 0..NEWTON_MAX_ITER {
        if res <= options.tol_residual {
            break;
        }
        let mut jac = BandMatrix::zeros(2 * n, band, band);
        for &(i, j, v) in &triplets {
            jac.add(2 * i, 2 * j, v);
            jac.add(2 * i + 1, 2 * j + 1, v);
        }
        for k in 0..n {
            jac.add(2 * k, 2 * k, params.alpha() * bw[k] + w[k] * (params.b() - u2[k]));
            jac.add(2 * k, 2 * k + 1, -w[k] * u1[k]);
            jac.add(2 * k + 1, 2 * k, -w[k] * params.a());
            jac.add(2 * k + 1, 2 * k + 1, bw[k] * power_flux_derivative(params.beta(), params.gamma(), u2[k]));
        }
        let rhs: Vec<f64> = (0..n).flat_map(|k| [r1[k], r2[k]]).collect();
        let delta = jac.factor()?.solve(&rhs);
        let mut step = 1.0;
        loop {
            let t1: Vec<f64> = (0..n).map(|k| u1[k] - step * delta[2 * k]).collect();
            let t2: Vec<f64> = (0..n).map(|k| u2[k] - step * delta[2 * k + 1]).collect();
            let (s1, s2) = weighted_residual(params, &t1, &t2, &grid);
            let sn = norm(&s1, &s2);
            if sn < rn || step < 1e-4 {
                u1 = t1;
                u2 = t2;
                r1 = s1;
                r2 = s2;
                break;
            }
            step *= 0.5;
        }
        let new_rn = norm(&r1, &r2);
        let new_res = steady_residual(params, &StatePair::from_raw(&grid, &u1, &u2));
        if new_res > 0.5 * res {
            stalls += 1;
            if stalls >= 3 {
                res = new_res;
                break;
            }
        } else {
            stalls = 0;
        }
        rn = new_rn;
        res = new_res;
    }
    let state = StatePair::from_raw(&grid, &u1, &u2);
    if !state.sup_abs().is_finite() {
        return Err(Error::Convergence { what: "steady Newton", iterations: NEWTON_MAX_ITER, residual: res });
    }
    if state.sup_abs() > options.blowup_threshold {
        return Err(Error::Divergence { norm: state.sup_abs(), threshold: options.blowup_threshold });
    }
    Ok(state)
}

/// Plain Picard for the scaled map `λΨ`; returns the final iterate and the
/// number of sweeps until its norm fell below `decay_threshold` (or the cap).
pub fn scaled_picard(
    params: &Params,
    lambda: f64,
    seed: &StatePair,
    options: &SolverOptions,
) -> Result<(StatePair, usize)> {
    let mut u = seed.clone();
    for it in 0..options.max_iter {
        if u.sup_abs() <= options.decay_threshold {
            return Ok((u, it));
        }
        if u.sup_abs() > options.blowup_threshold {
            return Err(Error::Divergence { norm: u.sup_abs(), threshold: options.blowup_threshold });
        }
        u = psi_map(params, &u, options)?.scaled(lambda, lambda);
    }
    Ok((u, options.max_iter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    pub verdict: Verdict,
    /// `‖s1 − s2‖∞` over both components.
    pub deviation: f64,
}

/// If the two states are ordered in either component, they must coincide.
/// States that fail the residual gate are reported as not applicable.
pub fn ordered_uniqueness_check(
    params: &Params,
    s1: &StatePair,
    s2: &StatePair,
    tol: f64,
    options: &SolverOptions,
) -> UniquenessReport {
    let deviation = if s1.u1.same_grid(&s2.u1) { s1.distance(s2) } else { f64::NAN };
    let gate = |s: &StatePair| steady_residual(params, s) <= options.tol_residual && s.min() > 0.0;
    if deviation.is_nan() || !gate(s1) || !gate(s2) {
        return UniquenessReport { verdict: Verdict::NotApplicable, deviation };
    }
    let le = |a: &Field, b: &Field| a.values().iter().zip(b.values()).all(|(x, y)| *x <= y + tol);
    let ordered = le(&s1.u1, &s2.u1) || le(&s2.u1, &s1.u1) || le(&s1.u2, &s2.u2) || le(&s2.u2, &s1.u2);
    let verdict = if !ordered {
        Verdict::NotApplicable
    } else if deviation <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    UniquenessReport { verdict, deviation }
}
