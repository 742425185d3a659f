//! Weighted integrals against φ1, the boundary bracket, and the residuals of
//! the two weighted-mass identities along a sampled run.

use crate::error::{Error, Result};
use crate::evolve::{Sample, TimeSeries};
use crate::grid::Field;
use crate::params::Params;

/// `∫_Ω f φ1 dx`.
pub fn weighted_mass(f: &Field, phi1: &Field) -> Result<f64> {
    check_grids(f, phi1)?;
    f.zip_map(phi1, |a, b| a * b).integrate_interior()
}

/// `∫_∂Ω f^p φ1 dS` over boundary nodes.
pub fn weighted_boundary(f: &Field, p: f64, phi1: &Field) -> Result<f64> {
    check_grids(f, phi1)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::domain(format!("boundary power must be ≥ 1, got {p}")));
    }
    let g = f.grid();
    if let Some(&k) = g.boundary_nodes().iter().find(|&&k| f.values()[k] < 0.0) {
        return Err(Error::domain(format!("negative boundary value {} at node {k}", f.values()[k])));
    }
    f.zip_map(phi1, |a, b| if p == 1.0 { a * b } else { a.powf(p) * b }).integrate_boundary()
}

fn check_grids(f: &Field, phi1: &Field) -> Result<()> {
    if f.same_grid(phi1) {
        Ok(())
    } else {
        Err(Error::GridMismatch("field and weight live on different grids".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// s₀ = b + λ1
    pub shift: f64,
}

impl BracketParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, shift: f64) -> Result<Self> {
        Params::new(1.0, 1.0, alpha, beta, gamma)?;
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::domain(format!("shift must be positive, got {shift}")));
        }
        Ok(BracketParams { alpha, beta, gamma, shift })
    }

    /// `g(s) = β s^γ − β s₀ s^(γ−1) − (α/2) s² + α s₀ s`.
    pub fn eval(&self, s: f64) -> f64 {
        let BracketParams { alpha, beta, gamma, shift } = *self;
        beta * s.powf(gamma) - beta * shift * s.powf(gamma - 1.0) - 0.5 * alpha * s * s + alpha * shift * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infimum {
    Finite { value: f64, argmin: f64 },
    NegInfinity,
}

impl Infimum {
    pub fn is_finite(&self) -> bool {
        matches!(self, Infimum::Finite { .. })
    }
}

const SCAN_POINTS: usize = 2000;

/// Infimum of the bracket over `s ≥ 0`.
pub fn bracket_infimum(bp: &BracketParams) -> Infimum {
    let BracketParams { alpha, beta, gamma, shift } = *bp;
    if gamma == 2.0 && alpha > 2.0 * beta {
        return Infimum::NegInfinity;
    }
    // beyond s_max the bracket is increasing and positive
    let s_max = if gamma == 2.0 {
        let lead = beta - 0.5 * alpha;
        let lin = (alpha - beta) * shift;
        if lead > 0.0 {
            (2.0 * (-lin / (2.0 * lead)).max(0.0)).max(1.0)
        } else {
            1.0
        }
    } else {
        1.0f64.max(2.0 * shift).max((alpha / beta).powf(1.0 / (gamma - 2.0)))
    };
    // dense scan guards against several local minima, golden section refines
    let h = s_max / SCAN_POINTS as f64;
    let mut best = 0;
    let mut best_val = bp.eval(0.0);
    for i in 1..=SCAN_POINTS {
        let v = bp.eval(i as f64 * h);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    let lo = (best as f64 - 1.0).max(0.0) * h;
    let hi = ((best + 1) as f64 * h).min(s_max);
    let (argmin, value) = golden_section(|s| bp.eval(s), lo, hi, 1e-10);
    if value < best_val {
        Infimum::Finite { value, argmin }
    } else {
        Infimum::Finite { value: best_val, argmin: best as f64 * h }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, f(s))
}

/// Leading samples whose times are equally spaced (the terminal sample of a
/// run may fall off the grid).
fn uniform_prefix(series: &TimeSeries) -> &[Sample] {
    let s = series.samples();
    if s.len() < 3 {
        return s;
    }
    let dt = s[1].t - s[0].t;
    let mut end = 2;
    while end < s.len() && ((s[end].t - s[end - 1].t) - dt).abs() <= 1e-9 * dt.max(1e-300) {
        end += 1;
    }
    &s[..end]
}

fn centered_residual(series: &TimeSeries, m: impl Fn(&Sample) -> f64, rest: impl Fn(&Sample) -> f64) -> f64 {
    let s = uniform_prefix(series);
    (1..s.len().saturating_sub(1))
        .map(|k| {
            let ddt = (m(&s[k + 1]) - m(&s[k - 1])) / (s[k + 1].t - s[k - 1].t);
            (ddt + rest(&s[k])).abs()
        })
        .fold(0.0, f64::max)
}

/// `max_k |d/dt m2 + λ1 m2 + (β−α) b2 − a m1|` at interior samples, γ = 2 only.
pub fn temperature_identity_residual(series: &TimeSeries, params: &Params, lambda1: f64) -> Result<f64> {
    if params.gamma() != 2.0 {
        return Err(Error::domain(format!("the temperature identity needs gamma = 2, got {}", params.gamma())));
    }
    let (a, ba) = (params.a(), params.beta() - params.alpha());
    Ok(centered_residual(series, |s| s.mass_u2, |s| lambda1 * s.mass_u2 + ba * s.bnd_u2 - a * s.mass_u1))
}

/// `max_k |d/dt m1 + (b+λ1) m1 − ∫u1u2φ1|` at interior samples.
pub fn neutron_identity_residual(series: &TimeSeries, params: &Params, lambda1: f64) -> Result<f64> {
    let c = params.b() + lambda1;
    Ok(centered_residual(series, |s| s.mass_u1, |s| c * s.mass_u1 - s.mass_u1u2))
}
