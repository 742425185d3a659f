//! Time integration: IMEX backward Euler with a frozen reaction coefficient,
//! adaptive steps, uniform sampling and outcome classification.

use std::sync::Arc;

use crate::elliptic::PowerBcProblem;
use crate::error::{Error, Result};
use crate::functionals::{weighted_boundary, weighted_mass};
use crate::grid::{Field, Grid, StatePair};
use crate::linalg::solve_symmetric;
use crate::params::{Params, SolverOptions};
use crate::spectral::{robin_eigenpair, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Decayed,
    ConvergedToSteady,
    BlowUp,
    Inconclusive,
}

impl OutcomeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeKind::Decayed => "decayed",
            OutcomeKind::ConvergedToSteady => "converged_to_steady",
            OutcomeKind::BlowUp => "blow_up",
            OutcomeKind::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub kind: OutcomeKind,
    pub t_final: f64,
    pub blowup_estimate: Option<f64>,
    /// Largest `‖u1‖∞` and `‖u2‖∞` seen over all accepted steps.
    pub peak_norms: (f64, f64),
}

/// Diagnostics at one sample time; weights are the L¹-normalized φ1 of the u1 problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub linf_u1: f64,
    pub linf_u2: f64,
    pub mass_u1: f64,
    pub mass_u2: f64,
    pub bnd_u2: f64,
    pub bnd_u2_gamma: f64,
    pub mass_u1u2: f64,
    /// Step size of the step that produced this sample (0 for the initial one).
    pub dt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn new() -> Self {
        TimeSeries::default()
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::State(format!("sample time {} does not follow {}", s.t, last.t)));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: RunOutcome,
    pub series: TimeSeries,
    /// States at the sample times, when `record_snapshots` is set.
    pub snapshots: Vec<StatePair>,
    pub final_state: StatePair,
    /// Smallest nodal value of either component over all accepted steps.
    pub min_value: f64,
    /// Times at which `‖u1‖∞` and `‖u2‖∞` first exceeded the blow-up threshold.
    pub first_exceed: (Option<f64>, Option<f64>),
    pub steps: usize,
}

impl Run {
    /// Number of sample intervals between the two threshold crossings.
    pub fn crossing_gap(&self, sample_interval: f64) -> Option<usize> {
        match self.first_exceed {
            (Some(a), Some(b)) => {
                let ka = (a / sample_interval).ceil() as i64;
                let kb = (b / sample_interval).ceil() as i64;
                Some((ka - kb).unsigned_abs() as usize)
            }
            _ => None,
        }
    }
}

/// Nodewise clamp to `[−M, M]`.
pub fn apply_cutoff(f: &Field, m: f64) -> Field {
    f.map(|v| v.clamp(-m, m))
}

/// Step rejection threshold on `dt·(max R − b)`: keeps the u1 matrix an M-matrix.
const REACTION_CFL: f64 = 0.5;
const GROWTH_LIMIT: f64 = 1.2;
const CALM_STEPS: usize = 10;
const STEADY_RATE: f64 = 1e-10;
const STEADY_STEPS: usize = 50;
const MAX_STEPS: usize = 2_000_000;

/// One IMEX step of size `dt`. The u1 reaction `[u1]_M [u2]_M` is linearized as
/// `R u1` with `R` frozen at the current state; the u2 boundary flux is solved
/// by Newton warm-started at the current u2.
pub fn step(state: &StatePair, dt: f64, params: &Params, options: &SolverOptions, cutoff: Option<f64>) -> Result<StatePair> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let grid = state.grid().clone();
    let tol = 1e-12 * (1.0 + state.sup_abs());
    if state.min() < -tol {
        return Err(Error::domain(format!("step needs a nonnegative state, min is {}", state.min())));
    }
    let u1 = state.u1.values();
    let u2 = state.u2.values();
    let w = grid.interior_weights();
    let bw = grid.boundary_weights();
    let reaction: Vec<f64> = (0..grid.len())
        .map(|k| {
            let (p, q) = (u1[k].max(0.0), u2[k].max(0.0));
            match cutoff {
                Some(m) if p > m => q.min(m) * m / p,
                Some(m) => q.min(m),
                None => q,
            }
        })
        .collect();
    let rmax = reaction.iter().fold(0.0f64, |m, &r| m.max(r));
    if dt * (rmax - params.b()) > REACTION_CFL {
        return Err(Error::Step { dt, reason: format!("reaction coefficient {rmax:.3e} too stiff") });
    }
    let d1: Vec<f64> = (0..grid.len())
        .map(|k| w[k] * (1.0 + dt * (params.b() - reaction[k])) + dt * params.alpha() * bw[k])
        .collect();
    let rhs1: Vec<f64> = (0..grid.len()).map(|k| w[k] * u1[k]).collect();
    let new1 = solve_symmetric(&grid, dt, &d1, &rhs1, Some(u1)).map_err(|e| step_error(dt, e))?;

    let rhs2: Vec<f64> = (0..grid.len()).map(|k| w[k] * (u2[k] + dt * params.a() * new1[k])).collect();
    let problem = PowerBcProblem {
        grid: &grid,
        theta: dt,
        mass: w,
        beta: params.beta(),
        gamma: params.gamma(),
        rhs: &rhs2,
    };
    let (new2, _) = problem
        .solve(u2.to_vec(), options.newton_tol, 100)
        .map_err(|e| step_error(dt, e))?;
    if new1.iter().chain(&new2).any(|v| !v.is_finite()) {
        return Err(Error::Step { dt, reason: "non-finite values".into() });
    }
    Ok(StatePair {
        u1: Field::from_raw(grid.clone(), new1),
        u2: Field::from_raw(grid, new2),
        t: state.t + dt,
    })
}

fn step_error(dt: f64, e: Error) -> Error {
    Error::Step { dt, reason: e.to_string() }
}

struct Sampler {
    phi: Field,
    gamma: f64,
}

impl Sampler {
    fn new(grid: &Arc<Grid>, params: &Params) -> Result<Self> {
        let phi = robin_eigenpair(grid, params.alpha(), Normalization::L1Unit)?.phi1;
        Ok(Sampler { phi, gamma: params.gamma() })
    }

    fn sample(&self, s: &StatePair, dt: f64) -> Sample {
        // finite states only reach here; overflow shows up as inf in the norms
        let u2p = s.u2.map(|v| v.max(0.0));
        Sample {
            t: s.t,
            linf_u1: s.u1.sup_abs(),
            linf_u2: s.u2.sup_abs(),
            mass_u1: weighted_mass(&s.u1, &self.phi).unwrap_or(f64::NAN),
            mass_u2: weighted_mass(&s.u2, &self.phi).unwrap_or(f64::NAN),
            bnd_u2: weighted_boundary(&u2p, 1.0, &self.phi).unwrap_or(f64::NAN),
            bnd_u2_gamma: weighted_boundary(&u2p, self.gamma, &self.phi).unwrap_or(f64::NAN),
            mass_u1u2: weighted_mass(&s.u1.zip_map(&s.u2, |a, b| a * b), &self.phi).unwrap_or(f64::NAN),
            dt,
        }
    }
}

/// Integrates from `state0` up to `t_end` (measured from `state0.t`) or until
/// the run is classified.
pub fn evolve(state0: &StatePair, t_end: f64, params: &Params, options: &SolverOptions) -> Result<Run> {
    options.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::domain(format!("t_end must be positive, got {t_end}")));
    }
    if !state0.u1.is_finite() || !state0.u2.is_finite() {
        return Err(Error::domain("initial state must be finite"));
    }
    if state0.min() < 0.0 {
        return Err(Error::domain(format!("initial state must be nonnegative, min is {}", state0.min())));
    }
    let sampler = Sampler::new(state0.grid(), params)?;
    let mut run = Run {
        outcome: RunOutcome {
            kind: OutcomeKind::Inconclusive,
            t_final: state0.t,
            blowup_estimate: None,
            peak_norms: (state0.u1.sup_abs(), state0.u2.sup_abs()),
        },
        series: TimeSeries::new(),
        snapshots: Vec::new(),
        final_state: state0.clone(),
        min_value: state0.min(),
        first_exceed: (None, None),
        steps: 0,
    };
    run.series.push(sampler.sample(state0, 0.0))?;
    if options.record_snapshots {
        run.snapshots.push(state0.clone());
    }
    if state0.u1.sup_abs() + state0.u2.sup_abs() <= options.decay_threshold {
        run.outcome.kind = OutcomeKind::Decayed;
        return Ok(run);
    }

    let t0 = state0.t;
    let t_stop = t0 + t_end;
    let mut state = state0.clone();
    let mut dt = options.dt_init;
    let mut calm = 0;
    let mut quiet = 0;
    let mut next_k = 1u64;
    let mut recent: Vec<(f64, f64)> = Vec::with_capacity(4);
    let mut last_sampled_t = t0;

    let kind = loop {
        if run.steps >= MAX_STEPS {
            break OutcomeKind::Inconclusive;
        }
        let next_sample = (t0 + next_k as f64 * options.sample_interval).min(t_stop);
        let remaining = next_sample - state.t;
        let lands = remaining <= dt * (1.0 + 1e-9);
        let h = if lands { remaining } else { dt };
        let trial = match step(&state, h, params, options, options.cutoff) {
            Ok(s) => Ok(s),
            Err(Error::Step { .. }) => Err(()),
            Err(e) => return Err(e),
        };
        let growth_ok = |s: &StatePair| {
            s.sup_abs() <= GROWTH_LIMIT * state.sup_abs() + options.decay_threshold || dt * 0.5 < options.dt_min
        };
        let accepted = match trial {
            Ok(s) if growth_ok(&s) => s,
            _ => {
                if dt * 0.5 < options.dt_min {
                    break OutcomeKind::Inconclusive;
                }
                dt *= 0.5;
                calm = 0;
                continue;
            }
        };
        run.steps += 1;
        let mut next = accepted;
        if lands {
            next.t = next_sample;
        }
        let rate = next.distance(&state) / h;
        state = next;
        run.min_value = run.min_value.min(state.min());
        let (n1, n2) = (state.u1.sup_abs(), state.u2.sup_abs());
        run.outcome.peak_norms.0 = run.outcome.peak_norms.0.max(n1);
        run.outcome.peak_norms.1 = run.outcome.peak_norms.1.max(n2);
        if n1 > options.blowup_threshold && run.first_exceed.0.is_none() {
            run.first_exceed.0 = Some(state.t);
        }
        if n2 > options.blowup_threshold && run.first_exceed.1.is_none() {
            run.first_exceed.1 = Some(state.t);
        }
        if recent.len() == 3 {
            recent.remove(0);
        }
        recent.push((state.t, n2));

        calm += 1;
        if calm >= CALM_STEPS && !lands {
            dt = (2.0 * dt).min(options.dt_max);
            calm = 0;
        }
        if lands {
            next_k += 1;
            run.series.push(sampler.sample(&state, h))?;
            last_sampled_t = state.t;
            if options.record_snapshots {
                run.snapshots.push(state.clone());
            }
        }

        if n1 > options.blowup_threshold && n2 > options.blowup_threshold {
            run.outcome.blowup_estimate = Some(extrapolate_blowup(&recent, state.t));
            break OutcomeKind::BlowUp;
        }
        if !(n1.is_finite() && n2.is_finite()) {
            break OutcomeKind::Inconclusive;
        }
        if n1 + n2 <= options.decay_threshold {
            break OutcomeKind::Decayed;
        }
        if rate < STEADY_RATE && n1 + n2 > options.decay_threshold {
            quiet += 1;
            if quiet >= STEADY_STEPS {
                break OutcomeKind::ConvergedToSteady;
            }
        } else {
            quiet = 0;
        }
        if state.t >= t_stop {
            break OutcomeKind::Inconclusive;
        }
    };
    if state.t > last_sampled_t {
        let dt_last = state.t - last_sampled_t;
        run.series.push(sampler.sample(&state, dt_last.min(dt)))?;
        if options.record_snapshots {
            run.snapshots.push(state.clone());
        }
    }
    run.outcome.kind = kind;
    run.outcome.t_final = state.t;
    run.final_state = state;
    Ok(run)
}

/// Zero of the least-squares line through `(t, 1/‖u2‖∞)`; never before `t_last`.
fn extrapolate_blowup(points: &[(f64, f64)], t_last: f64) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(t, n)| (t, 1.0 / n)).collect();
    if pts.len() < 2 {
        return t_last;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if sxx == 0.0 || sxy >= 0.0 {
        return t_last;
    }
    let slope = sxy / sxx;
    (tm - ym / slope).max(t_last)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub node: usize,
    /// 1 or 2
    pub component: u8,
    /// Amount by which A exceeds B plus the slack.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub ok: bool,
    pub samples_checked: usize,
    /// Largest `u^A − u^B` seen (negative when strictly ordered).
    pub max_excess: f64,
    pub first_violation: Option<Violation>,
}

/// Checks `A ≤ B` nodewise at every sample time the two runs share. Both runs
/// need recorded snapshots.
pub fn comparison_check(a: &Run, b: &Run) -> Result<ComparisonReport> {
    if a.snapshots.is_empty() || b.snapshots.is_empty() {
        return Err(Error::State("comparison needs runs with recorded snapshots".into()));
    }
    if !a.snapshots[0].u1.same_grid(&b.snapshots[0].u1) {
        return Err(Error::GridMismatch("comparison runs use different grids".into()));
    }
    let mut report = ComparisonReport { ok: true, samples_checked: 0, max_excess: f64::NEG_INFINITY, first_violation: None };
    let mut j = 0;
    for sa in &a.snapshots {
        while j < b.snapshots.len() && b.snapshots[j].t < sa.t - 1e-12 * (1.0 + sa.t) {
            j += 1;
        }
        let Some(sb) = b.snapshots.get(j) else { break };
        if (sb.t - sa.t).abs() > 1e-12 * (1.0 + sa.t) {
            continue;
        }
        report.samples_checked += 1;
        let slack = 1e-8 * (1.0 + sb.sup_abs());
        for (component, (fa, fb)) in [(1u8, (&sa.u1, &sb.u1)), (2u8, (&sa.u2, &sb.u2))] {
            for (node, (x, y)) in fa.values().iter().zip(fb.values()).enumerate() {
                let d = x - y;
                report.max_excess = report.max_excess.max(d);
                if d > slack && report.first_violation.is_none() {
                    report.ok = false;
                    report.first_violation = Some(Violation { t: sa.t, node, component, excess: d - slack });
                }
            }
        }
    }
    Ok(report)
}
