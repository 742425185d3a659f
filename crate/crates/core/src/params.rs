//! Problem coefficients and solver controls.

use crate::error::{Error, Result};

/// Coefficients of the coupled system
///
/// ```text
/// ∂t u1 − Δu1 = u1 u2 − b u1,   ∂ν u1 + α u1 = 0
/// ∂t u2 − Δu2 = a u1,           ∂ν u2 + β |u2|^(γ−2) u2 = 0
/// ```
///
/// Fields are private so that every value in circulation has passed
/// [`Params::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

/// Names of the coefficients that can be varied independently.
pub const PARAM_NAMES: [&str; 5] = ["a", "b", "alpha", "beta", "gamma"];

impl Params {
    pub fn new(a: f64, b: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let all = [("a", a), ("b", b), ("alpha", alpha), ("beta", beta), ("gamma", gamma)];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        if a <= 0.0 {
            return Err(Error::domain(format!("a must be > 0, got {a}")));
        }
        if b <= 0.0 {
            return Err(Error::domain(format!("b must be > 0, got {b}")));
        }
        if alpha < 0.0 {
            return Err(Error::domain(format!("alpha must be ≥ 0, got {alpha}")));
        }
        if beta <= 0.0 {
            return Err(Error::domain(format!("beta must be > 0, got {beta}")));
        }
        if gamma < 2.0 {
            return Err(Error::domain(format!("gamma must be ≥ 2, got {gamma}")));
        }
        Ok(Params { a, b, alpha, beta, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True iff `(γ = 2 and α ≤ 2β)` or `γ > 2`: the hypotheses under which a
    /// positive stationary solution is known to exist.
    pub fn existence_conditions_hold(&self) -> bool {
        (self.gamma == 2.0 && self.alpha <= 2.0 * self.beta) || self.gamma > 2.0
    }

    /// Copy with one named coefficient replaced, re-validated.
    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut p = *self;
        match name {
            "a" => p.a = value,
            "b" => p.b = value,
            "alpha" => p.alpha = value,
            "beta" => p.beta = value,
            "gamma" => p.gamma = value,
            other => return Err(Error::domain(format!("unknown parameter `{other}`"))),
        }
        Params::new(p.a, p.b, p.alpha, p.beta, p.gamma)
    }
}

/// Tolerances, iteration caps and time-step controls shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Picard relaxation ω in (0, 1].
    pub relax_omega: f64,
    pub newton_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Sup-norm level at which a component counts as blown up.
    pub blowup_threshold: f64,
    /// Level of ‖u1‖∞ + ‖u2‖∞ at which a run counts as decayed.
    pub decay_threshold: f64,
    /// Spacing of the uniform sample times recorded by the time integrator.
    pub sample_interval: f64,
    /// Clamp level for the cut-off reaction term; `None` integrates the plain system.
    pub cutoff: Option<f64>,
    /// Keep a copy of the state at every sample time.
    pub record_snapshots: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_residual: 1e-10,
            max_iter: 10_000,
            relax_omega: 0.5,
            newton_tol: 1e-12,
            dt_init: 1e-2,
            dt_min: 1e-14,
            dt_max: 5e-2,
            blowup_threshold: 1e8,
            decay_threshold: 1e-8,
            sample_interval: 5e-2,
            cutoff: None,
            record_snapshots: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_residual", self.tol_residual),
            ("newton_tol", self.newton_tol),
            ("dt_min", self.dt_min),
            ("blowup_threshold", self.blowup_threshold),
            ("decay_threshold", self.decay_threshold),
            ("sample_interval", self.sample_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be ≥ 1"));
        }
        if !(self.relax_omega > 0.0 && self.relax_omega <= 1.0) {
            return Err(Error::domain(format!(
                "relax_omega must lie in (0, 1], got {}",
                self.relax_omega
            )));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::domain(format!(
                "time steps must satisfy 0 < dt_min ≤ dt_init ≤ dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if self.decay_threshold >= self.blowup_threshold {
            return Err(Error::domain("decay_threshold must be below blowup_threshold"));
        }
        if let Some(m) = self.cutoff {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::domain(format!("cutoff must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// Options with a constant time step: no halving or doubling can occur.
    pub fn fixed_step(mut self, dt: f64) -> Self {
        self.dt_init = dt;
        self.dt_min = dt;
        self.dt_max = dt;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inadmissible_coefficients() {
        assert!(Params::new(0.0, 1.0, 1.0, 1.0, 2.0).is_err());
        assert!(Params::new(1.0, -1.0, 1.0, 1.0, 2.0).is_err());
        assert!(Params::new(1.0, 1.0, -0.1, 1.0, 2.0).is_err());
        assert!(Params::new(1.0, 1.0, 1.0, 0.0, 2.0).is_err());
        let err = Params::new(1.0, 1.0, 1.0, 1.0, 1.5).unwrap_err();
        assert!(err.to_string().contains("gamma must be ≥ 2"));
        assert!(Params::new(f64::NAN, 1.0, 1.0, 1.0, 2.0).is_err());
        assert!(Params::new(1.0, 1.0, 0.0, 1.0, 2.0).is_ok());
    }

    #[test]
    fn condition_flag() {
        let p = |alpha, beta, gamma| Params::new(1.0, 1.0, alpha, beta, gamma).unwrap();
        assert!(p(2.0, 1.0, 2.0).existence_conditions_hold());
        assert!(!p(2.0 + 1e-12, 1.0, 2.0).existence_conditions_hold());
        assert!(p(100.0, 1.0, 2.5).existence_conditions_hold());
        assert!(p(0.0, 0.3, 2.0).existence_conditions_hold());
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions::default().validate().is_ok());
        let bad = SolverOptions { relax_omega: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverOptions { dt_min: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SolverOptions::default().fixed_step(1e-3).validate().is_ok());
    }
}
