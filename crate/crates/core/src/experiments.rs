//! Threshold experiments around a positive steady state, and parameter sweeps.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{evolve, OutcomeKind, Run, RunOutcome, TimeSeries};
use crate::functionals::weighted_mass;
use crate::grid::{Grid, StatePair};
use crate::params::{Params, SolverOptions, PARAM_NAMES};
use crate::spectral::{robin_eigenpair, Normalization};
use crate::steady::{find_positive_steady, SteadyResult};

/// Horizon of part-1 runs; decay below 1e-8 takes t ≈ 15 on the reference problem.
pub const PART1_T_END: f64 = 500.0;
pub const PART2_T_END: f64 = 100.0;
/// Part-2 subsolution checks stop at this fraction of the blow-up estimate.
pub const SUBSOLUTION_WINDOW: f64 = 0.9;
const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub steady: SteadyResult,
    pub l1: f64,
    pub l2: f64,
    pub epsilon: Option<f64>,
    pub outcome: RunOutcome,
    pub outcome_ok: bool,
    /// Part 2: `u_i(t) ≥ l_i e^{εt} ū_i` on the verified window. Part 1: always true.
    pub subsolution_ok: bool,
    /// Part 1 only: per-node non-increase across samples.
    pub monotone_decay_ok: Option<bool>,
    /// Part 1 only: `u_i(t) ≤ ū_i` at all samples.
    pub bounded_by_steady_ok: Option<bool>,
    /// Part 2 only: log-mass growth of u2 at least `εt`.
    pub exponent_ok: Option<bool>,
    /// `(t, y(t))` at the sample times.
    pub y_series: Vec<(f64, f64)>,
    /// Part 2 only: y increasing after the initial transient.
    pub y_monotone_ok: Option<bool>,
    pub series: TimeSeries,
    pub final_state: StatePair,
}

impl ThresholdReport {
    pub fn passed(&self) -> bool {
        self.outcome_ok
            && self.subsolution_ok
            && self.monotone_decay_ok.unwrap_or(true)
            && self.bounded_by_steady_ok.unwrap_or(true)
            && self.exponent_ok.unwrap_or(true)
            && self.y_monotone_ok.unwrap_or(true)
    }
}

/// ε with `ε + (1−l2)ū2 < 0` and `εl2ū2 + a(l2−l1)ū1 < 0` at every node.
pub fn choose_epsilon(steady: &StatePair, l1: f64, l2: f64, a: f64) -> Result<f64> {
    if !(l2 > 1.0 && l1 > l2) {
        return Err(Error::domain(format!("need l1 > l2 > 1, got l1={l1}, l2={l2}")));
    }
    if !(a > 0.0) {
        return Err(Error::domain(format!("a must be positive, got {a}")));
    }
    if !(steady.u1.min() > 0.0 && steady.u2.min() > 0.0) {
        return Err(Error::domain("steady state must be strictly positive"));
    }
    let (u1, u2) = (steady.u1.values(), steady.u2.values());
    let ratio = u1.iter().zip(u2).map(|(p, q)| p / q).fold(f64::INFINITY, f64::min);
    let first = a * (l1 - l2) * ratio / l2;
    let second = (l2 - 1.0) * steady.u2.min();
    let eps = 0.5 * first.min(second);
    let holds = u1
        .iter()
        .zip(u2)
        .all(|(p, q)| eps + (1.0 - l2) * q < 0.0 && eps * l2 * q + a * (l2 - l1) * p < 0.0);
    if !holds {
        return Err(Error::State(format!("ε = {eps} does not satisfy both strict inequalities")));
    }
    Ok(eps)
}

/// A positive steady state computed once and reused for any number of runs.
#[derive(Debug, Clone)]
pub struct ThresholdExperiment {
    params: Params,
    steady: SteadyResult,
}

impl ThresholdExperiment {
    pub fn new(grid: &Arc<Grid>, params: &Params, options: &SolverOptions) -> Result<Self> {
        let steady = find_positive_steady(grid, params, 1.0, options)?;
        Self::from_steady(params, steady)
    }

    pub fn from_steady(params: &Params, steady: SteadyResult) -> Result<Self> {
        if !steady.is_positive() {
            return Err(Error::State(format!(
                "no positive steady state ({:?}, residual {:.3e})",
                steady.classification, steady.residual
            )));
        }
        Ok(ThresholdExperiment { params: *params, steady })
    }

    pub fn steady(&self) -> &SteadyResult {
        &self.steady
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Data below the steady state: global existence, decay, monotonicity.
    pub fn part1(&self, l1: f64, l2: f64, options: &SolverOptions) -> Result<ThresholdReport> {
        if !(l1 > 0.0 && l1 < l2 && l2 <= 1.0) {
            return Err(Error::domain(format!("part 1 needs 0 < l1 < l2 ≤ 1, got l1={l1}, l2={l2}")));
        }
        let run = self.run(l1, l2, PART1_T_END, options)?;
        let bar = &self.steady.state;
        let mut monotone = true;
        for w in run.snapshots.windows(2) {
            for (f0, f1) in [(&w[0].u1, &w[1].u1), (&w[0].u2, &w[1].u2)] {
                monotone &= f0.values().iter().zip(f1.values()).all(|(a, b)| *b <= a + ORDER_TOL);
            }
        }
        let bounded = run.snapshots.iter().all(|s| {
            [(&s.u1, &bar.u1), (&s.u2, &bar.u2)]
                .iter()
                .all(|(f, g)| f.values().iter().zip(g.values()).all(|(x, y)| *x <= y + ORDER_TOL))
        });
        let norms_decreasing = run
            .series
            .samples()
            .windows(2)
            .all(|w| w[1].linf_u1 <= w[0].linf_u1 + ORDER_TOL && w[1].linf_u2 <= w[0].linf_u2 + ORDER_TOL);
        let outcome_ok = match run.outcome.kind {
            OutcomeKind::Decayed => true,
            OutcomeKind::Inconclusive => norms_decreasing,
            OutcomeKind::ConvergedToSteady => true,
            OutcomeKind::BlowUp => false,
        };
        Ok(ThresholdReport {
            steady: self.steady.clone(),
            l1,
            l2,
            epsilon: None,
            y_series: self.y_series(&run)?,
            outcome: run.outcome,
            outcome_ok,
            subsolution_ok: true,
            monotone_decay_ok: Some(monotone),
            bounded_by_steady_ok: Some(bounded),
            exponent_ok: None,
            y_monotone_ok: None,
            series: run.series,
            final_state: run.final_state,
        })
    }

    /// Data above the steady state (γ = 2, α ≤ 2β): finite-time blow-up.
    pub fn part2(&self, l1: f64, l2: f64, options: &SolverOptions) -> Result<ThresholdReport> {
        let p = &self.params;
        if !(p.gamma() == 2.0 && p.alpha() <= 2.0 * p.beta()) {
            return Err(Error::domain(format!(
                "part 2 needs gamma = 2 and alpha ≤ 2 beta, got gamma={}, alpha={}, beta={}",
                p.gamma(),
                p.alpha(),
                p.beta()
            )));
        }
        let eps = choose_epsilon(&self.steady.state, l1, l2, p.a())?;
        let run = self.run(l1, l2, PART2_T_END, options)?;
        let bar = &self.steady.state;
        let window = run.outcome.blowup_estimate.unwrap_or(run.outcome.t_final) * SUBSOLUTION_WINDOW;
        let phi = robin_eigenpair(bar.grid(), p.alpha(), Normalization::L1Unit)?.phi1;
        let m0 = weighted_mass(&bar.u2.scale(l2), &phi)?;
        let mut sub = true;
        let mut exponent = true;
        for s in run.snapshots.iter().filter(|s| s.t <= window) {
            let growth = (eps * s.t).exp();
            let tol = 1e-6 * s.sup_abs();
            for (f, g, l) in [(&s.u1, &bar.u1, l1), (&s.u2, &bar.u2, l2)] {
                sub &= f.values().iter().zip(g.values()).all(|(x, y)| *x >= l * growth * y - tol);
            }
            let m = weighted_mass(&s.u2, &phi)?;
            exponent &= m.ln() - m0.ln() >= eps * s.t - 1e-3;
        }
        let y = self.y_series(&run)?;
        // transient: the first tenth of the run
        let skip = y.len() / 10;
        let y_monotone = y[skip..].windows(2).all(|w| w[1].1 >= w[0].1);
        Ok(ThresholdReport {
            steady: self.steady.clone(),
            l1,
            l2,
            epsilon: Some(eps),
            y_series: y,
            outcome_ok: run.outcome.kind == OutcomeKind::BlowUp,
            outcome: run.outcome,
            subsolution_ok: sub,
            monotone_decay_ok: None,
            bounded_by_steady_ok: None,
            exponent_ok: Some(exponent),
            y_monotone_ok: Some(y_monotone),
            series: run.series,
            final_state: run.final_state,
        })
    }

    /// Evolution from `(l1 ū1, l2 ū2)` with snapshots recorded.
    pub fn run(&self, l1: f64, l2: f64, t_end: f64, options: &SolverOptions) -> Result<Run> {
        let mut opts = options.clone();
        opts.record_snapshots = true;
        evolve(&self.steady.state.scaled(l1, l2), t_end, &self.params, &opts)
    }

    /// `y(t) = ∫u2φ1 + (β−α)∫₀ᵗ∫_∂Ω u2φ1` (boundary term only when β > α),
    /// time integral by the trapezoid rule over samples.
    fn y_series(&self, run: &Run) -> Result<Vec<(f64, f64)>> {
        let ba = self.params.beta() - self.params.alpha();
        let s = run.series.samples();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(s.len());
        for (k, x) in s.iter().enumerate() {
            if k > 0 && ba > 0.0 {
                acc += 0.5 * (x.t - s[k - 1].t) * (x.bnd_u2 + s[k - 1].bnd_u2);
            }
            out.push((x.t, x.mass_u2 + ba.max(0.0) * acc));
        }
        Ok(out)
    }
}

pub fn run_threshold_part1(
    grid: &Arc<Grid>,
    params: &Params,
    l1: f64,
    l2: f64,
    options: &SolverOptions,
) -> Result<ThresholdReport> {
    ThresholdExperiment::new(grid, params, options)?.part1(l1, l2, options)
}

pub fn run_threshold_part2(
    grid: &Arc<Grid>,
    params: &Params,
    l1: f64,
    l2: f64,
    options: &SolverOptions,
) -> Result<ThresholdReport> {
    ThresholdExperiment::new(grid, params, options)?.part2(l1, l2, options)
}

/// Which experiment a sweep row ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowMode {
    /// below the steady state
    Part1,
    /// above the steady state with γ = 2 and α ≤ 2β
    Part2,
    /// outside both theorem hypotheses; plain evolution, outcome reported as-is
    Gap,
}

#[derive(Debug, Clone)]
pub struct RowSummary {
    pub mode: RowMode,
    pub outcome: RunOutcome,
    pub epsilon: Option<f64>,
    pub steady_residual: f64,
    pub checks_passed: bool,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub params: Option<Params>,
    pub l1: f64,
    pub l2: f64,
    pub result: std::result::Result<RowSummary, String>,
}

pub const SWEEP_AXES: [&str; 8] = ["a", "b", "alpha", "beta", "gamma", "l1", "l2", "l"];

/// Worker count: `NRRD_THREADS` if set to a positive integer, else rayon's default.
pub fn sweep_threads() -> usize {
    std::env::var("NRRD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// One row per value, in input order. Axis `l` multiplies both `l1` and `l2`.
pub fn sweep(
    grid: &Arc<Grid>,
    base: &Params,
    axis: &str,
    values: &[f64],
    l1: f64,
    l2: f64,
    options: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(Error::domain(format!("unknown sweep axis {axis:?}; expected one of {SWEEP_AXES:?}")));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    // steady state shared by every row when only the scalings vary
    let shared = if PARAM_NAMES.contains(&axis) {
        None
    } else {
        Some(ThresholdExperiment::new(grid, base, options).map_err(|e| e.to_string()))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads())
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .map(|&v| {
                let (p, rl1, rl2) = match axis {
                    "l1" => (Ok(*base), v, l2),
                    "l2" => (Ok(*base), l1, v),
                    "l" => (Ok(*base), l1 * v, l2 * v),
                    name => (base.with(name, v), l1, l2),
                };
                let params = p.as_ref().ok().copied();
                let result = match p {
                    Err(e) => Err(e.to_string()),
                    Ok(p) => match &shared {
                        Some(Ok(exp)) => sweep_row(exp, rl1, rl2, options),
                        Some(Err(e)) => Err(e.clone()),
                        None => ThresholdExperiment::new(grid, &p, options)
                            .map_err(|e| e.to_string())
                            .and_then(|exp| sweep_row(&exp, rl1, rl2, options)),
                    },
                };
                SweepRow { value: v, params, l1: rl1, l2: rl2, result }
            })
            .collect()
    });
    Ok(rows)
}

fn sweep_row(exp: &ThresholdExperiment, l1: f64, l2: f64, options: &SolverOptions) -> std::result::Result<RowSummary, String> {
    let p = exp.params();
    let residual = exp.steady().residual;
    let summary = if l1 > 0.0 && l1 < l2 && l2 <= 1.0 {
        let r = exp.part1(l1, l2, options).map_err(|e| e.to_string())?;
        RowSummary { mode: RowMode::Part1, checks_passed: r.passed(), outcome: r.outcome, epsilon: None, steady_residual: residual }
    } else if l2 > 1.0 && l1 > l2 && p.gamma() == 2.0 && p.alpha() <= 2.0 * p.beta() {
        let r = exp.part2(l1, l2, options).map_err(|e| e.to_string())?;
        RowSummary { mode: RowMode::Part2, checks_passed: r.passed(), outcome: r.outcome, epsilon: r.epsilon, steady_residual: residual }
    } else {
        let run = exp.run(l1, l2, PART1_T_END, options).map_err(|e| e.to_string())?;
        RowSummary { mode: RowMode::Gap, checks_passed: true, outcome: run.outcome, epsilon: None, steady_residual: residual }
    };
    Ok(summary)
}

/// No Decayed row may have both scalings ≥ those of a BlowUp row with the same parameters.
pub fn dichotomy_consistent(rows: &[SweepRow]) -> bool {
    let kind = |r: &SweepRow| r.result.as_ref().ok().map(|s| s.outcome.kind);
    rows.iter().filter(|d| kind(d) == Some(OutcomeKind::Decayed)).all(|d| {
        !rows.iter().filter(|b| kind(b) == Some(OutcomeKind::BlowUp)).any(|b| {
            b.params == d.params && d.l1 >= b.l1 && d.l2 >= b.l2
        })
    })
}
