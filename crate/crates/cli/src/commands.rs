//! Command execution and exit codes.

use std::path::Path;
use std::sync::Arc;

use evalexpr::{build_operator_tree, DefaultNumericTypes};
use nrrd_core::evolve::{comparison_check, evolve, TimeSeries};
use nrrd_core::experiments::{dichotomy_consistent, sweep, ThresholdExperiment, ThresholdReport};
use nrrd_core::functionals::{bracket_infimum, BracketParams};
use nrrd_core::spectral::{hopf_floor, robin_eigenpair, Normalization};
use nrrd_core::steady::{find_positive_steady, find_positive_steady_from, ordered_uniqueness_check, Classification, Verdict};
use nrrd_core::{Field, Grid, Params, StatePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{load_checkpoint_on, save_checkpoint};
use crate::config::{expression_context, Command, InitialSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{norms_svg, profiles_svg, series_csv, write_file, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_CHECKS_FAILED: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

/// Random draws in `check` come from this seed.
pub const CHECK_SEED: u64 = 0x5eed;
const CHECK_TRIALS: usize = 8;
const CHECK_T_END: f64 = 2.0;
const POSITIVITY_FLOOR: f64 = -1e-12;
const CUTOFF_TOL: f64 = 1e-12;
const UNIQUENESS_TOL: f64 = 1e-6;

/// Runs the configured command, writing artifacts to `config.output_dir`.
/// Diagnostics go to stderr.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config { .. } => EXIT_CONFIG,
                _ => EXIT_SOLVER,
            }
        }
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    stride: usize,
}

impl Artifacts<'_> {
    fn series(&self, series: &TimeSeries) -> Result<()> {
        write_file(self.dir, "series.csv", &series_csv(series, self.stride)?)
    }

    fn report(&self, report: &Report) -> Result<()> {
        write_file(self.dir, "report.txt", report.render().as_bytes())
    }

    fn checkpoint(&self, state: &StatePair) -> Result<()> {
        save_checkpoint(state, &self.dir.join("final.ckpt"))
    }

    /// Plots never change the exit code.
    fn plot(&self, name: &str, svg: String) {
        if let Err(e) = write_file(self.dir, name, svg.as_bytes()) {
            eprintln!("warning: could not write {name}: {e}");
        }
    }
}

fn execute(config: &RunConfig) -> Result<i32> {
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let out = Artifacts { dir, stride: config.sample_stride };
    let grid = config.grid.build()?;
    let mut report = Report::new();
    report.add("command", config.command.name());
    let code = match config.command {
        Command::Eig => eig(config, &grid, &out, &mut report)?,
        Command::Steady => steady(config, &grid, &out, &mut report)?,
        Command::Evolve => evolve_cmd(config, &grid, &out, &mut report)?,
        Command::Threshold1 | Command::Threshold2 => threshold(config, &grid, &out, &mut report)?,
        Command::Sweep => sweep_cmd(config, &grid, &out, &mut report)?,
        Command::Check => check(config, &grid, &out, &mut report)?,
    };
    report.add("exit_code", code);
    out.report(&report)?;
    Ok(code)
}

fn eig(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let pair = robin_eigenpair(grid, config.params.alpha(), Normalization::L2Unit)?;
    report.num("alpha", config.params.alpha());
    report.num("lambda1", pair.lambda1);
    report.num("phi1_min", hopf_floor(&pair));
    report.num("phi1_max", pair.phi1.max());
    let ok = hopf_floor(&pair) > 0.0;
    report.add("phi1_positive_ok", ok);
    out.series(&TimeSeries::new())?;
    out.plot("plot_profiles.svg", profiles_svg("first Robin eigenfunction", &[("φ1", &pair.phi1)]));
    Ok(if ok { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

fn steady(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let (p, o) = (&config.params, &config.options);
    let result = match &config.initial {
        // the zero seed is a fixed point; start from the eigenfunction instead
        InitialSpec::Zero => find_positive_steady(grid, p, 1.0, o)?,
        _ => find_positive_steady_from(p, &initial_state(config, grid)?, o)?,
    };
    report.add("classification", format!("{:?}", result.classification));
    report.add("method", format!("{:?}", result.method));
    report.add("iterations", result.iterations);
    report.num("residual", result.residual);
    report.num("min_u1", result.state.u1.min());
    report.num("min_u2", result.state.u2.min());
    report.num("linf_u1", result.state.u1.sup_abs());
    report.num("linf_u2", result.state.u2.sup_abs());
    let mut ok = result.classification == Classification::Positive;
    if ok {
        for scale in [0.5, 2.0] {
            let other = find_positive_steady_from(p, &result.state.scaled(scale, scale), o)?;
            let u = ordered_uniqueness_check(p, &result.state, &other.state, UNIQUENESS_TOL, o);
            let key = format!("uniqueness_seed_{scale}");
            report.add(&key, format!("{:?}", u.verdict));
            report.num(&format!("{key}_deviation"), u.deviation);
            ok &= u.verdict != Verdict::Fail;
        }
    }
    out.series(&TimeSeries::new())?;
    out.checkpoint(&result.state)?;
    out.plot(
        "plot_profiles.svg",
        profiles_svg("steady state", &[("ū1", &result.state.u1), ("ū2", &result.state.u2)]),
    );
    Ok(if ok { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

fn evolve_cmd(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let state0 = initial_state(config, grid)?;
    let run = evolve(&state0, config.t_end, &config.params, &config.options)?;
    report.add("outcome", format!("{:?}", run.outcome.kind));
    report.num("t_final", run.outcome.t_final);
    report.opt("blowup_estimate", run.outcome.blowup_estimate.map(|t| format!("{t:?}")));
    report.num("peak_u1", run.outcome.peak_norms.0);
    report.num("peak_u2", run.outcome.peak_norms.1);
    report.add("steps", run.steps);
    report.num("min_value", run.min_value);
    report.opt("crossing_gap_samples", run.crossing_gap(config.options.sample_interval));
    let ok = run.min_value >= POSITIVITY_FLOOR;
    report.add("nonnegative_ok", ok);
    out.series(&run.series)?;
    out.checkpoint(&run.final_state)?;
    out.plot("plot_norms.svg", norms_svg(&run.series));
    out.plot(
        "plot_profiles.svg",
        profiles_svg("final state", &[("u1", &run.final_state.u1), ("u2", &run.final_state.u2)]),
    );
    Ok(if !ok {
        EXIT_CHECKS_FAILED
    } else if run.outcome.kind == nrrd_core::evolve::OutcomeKind::BlowUp {
        EXIT_BLOWUP
    } else {
        EXIT_OK
    })
}

fn threshold(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let InitialSpec::ScaledSteady { l1, l2 } = config.initial else {
        return Err(CliError::config("threshold commands need [initial] kind = \"scaled_steady\""));
    };
    let exp = ThresholdExperiment::new(grid, &config.params, &config.options)?;
    let part2 = config.command == Command::Threshold2;
    let r = if part2 {
        exp.part2(l1, l2, &config.options)?
    } else {
        exp.part1(l1, l2, &config.options)?
    };
    threshold_report(&r, report);
    out.series(&r.series)?;
    out.checkpoint(&r.final_state)?;
    out.plot("plot_norms.svg", norms_svg(&r.series));
    let bar = &r.steady.state;
    out.plot(
        "plot_profiles.svg",
        profiles_svg(
            "steady state and final state",
            &[("ū1", &bar.u1), ("ū2", &bar.u2), ("u1 final", &r.final_state.u1), ("u2 final", &r.final_state.u2)],
        ),
    );
    let blowup = r.outcome.kind == nrrd_core::evolve::OutcomeKind::BlowUp;
    Ok(match (part2, r.passed()) {
        (true, true) if blowup => EXIT_BLOWUP,
        (false, true) => EXIT_OK,
        _ => EXIT_CHECKS_FAILED,
    })
}

fn threshold_report(r: &ThresholdReport, report: &mut Report) {
    report.num("l1", r.l1);
    report.num("l2", r.l2);
    report.add("outcome", format!("{:?}", r.outcome.kind));
    report.num("t_final", r.outcome.t_final);
    report.opt("blowup_estimate", r.outcome.blowup_estimate.map(|t| format!("{t:?}")));
    report.num("peak_u1", r.outcome.peak_norms.0);
    report.num("peak_u2", r.outcome.peak_norms.1);
    report.num("steady_residual", r.steady.residual);
    report.opt("epsilon", r.epsilon.map(|e| format!("{e:?}")));
    report.add("outcome_ok", r.outcome_ok);
    report.add("subsolution_ok", r.subsolution_ok);
    report.opt("monotone_decay_ok", r.monotone_decay_ok);
    report.opt("bounded_by_steady_ok", r.bounded_by_steady_ok);
    report.opt("exponent_ok", r.exponent_ok);
    report.opt("y_monotone_ok", r.y_monotone_ok);
    report.add("passed", r.passed());
}

fn sweep_cmd(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let spec = config.sweep.as_ref().ok_or_else(|| CliError::config("sweep needs a [sweep] section"))?;
    let rows = sweep(grid, &config.params, &spec.axis, &spec.values, spec.l1, spec.l2, &config.options)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Format(format!("csv: {e}"));
    w.write_record([
        "value", "a", "b", "alpha", "beta", "gamma", "l1", "l2", "mode", "outcome", "t_final", "blowup_estimate",
        "epsilon", "steady_residual", "checks_passed", "error",
    ])
    .map_err(csv_err)?;
    let mut checks = true;
    let mut failures = 0;
    for row in &rows {
        let f = |v: f64| format!("{v:?}");
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        let p = row.params.map(|p| [p.a(), p.b(), p.alpha(), p.beta(), p.gamma()].map(f));
        let mut rec = vec![f(row.value)];
        rec.extend(p.unwrap_or_default());
        rec.extend([f(row.l1), f(row.l2)]);
        match &row.result {
            Ok(s) => {
                checks &= s.checks_passed;
                rec.extend([
                    format!("{:?}", s.mode),
                    format!("{:?}", s.outcome.kind),
                    f(s.outcome.t_final),
                    opt(s.outcome.blowup_estimate),
                    opt(s.epsilon),
                    f(s.steady_residual),
                    s.checks_passed.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                failures += 1;
                eprintln!("warning: sweep row {} = {:?}: {e}", spec.axis, row.value);
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Format(format!("csv: {e}")))?;
    write_file(out.dir, "sweep.csv", &bytes)?;
    out.series(&TimeSeries::new())?;
    let consistent = dichotomy_consistent(&rows);
    report.add("axis", &spec.axis);
    report.add("rows", rows.len());
    report.add("failed_rows", failures);
    report.add("checks_ok", checks);
    report.add("dichotomy_consistent", consistent);
    Ok(if consistent && checks { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

/// Seeded invariant suite: positivity, comparison, cut-off consistency and
/// the bracket dichotomy.
fn check(config: &RunConfig, grid: &Arc<Grid>, out: &Artifacts, report: &mut Report) -> Result<i32> {
    let (p, o) = (&config.params, &config.options);
    let exp = ThresholdExperiment::new(grid, p, o)?;
    let bar = &exp.steady().state;
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    let mut snap = o.clone();
    snap.record_snapshots = true;

    let mut min_value = f64::INFINITY;
    for _ in 0..CHECK_TRIALS {
        let s = random_below(&mut rng, bar, 1.0);
        min_value = min_value.min(evolve(&s, CHECK_T_END, p, o)?.min_value);
    }
    let positivity = min_value >= POSITIVITY_FLOOR;
    report.num("positivity_min_value", min_value);
    report.add("positivity_ok", positivity);

    let mut violations = 0;
    let mut max_excess = 0.0f64;
    for _ in 0..CHECK_TRIALS {
        let b = random_below(&mut rng, bar, 1.0);
        let a = random_below(&mut rng, &b, 1.0);
        let ra = evolve(&a, CHECK_T_END, p, &snap)?;
        let rb = evolve(&b, CHECK_T_END, p, &snap)?;
        let c = comparison_check(&ra, &rb)?;
        violations += usize::from(!c.ok);
        max_excess = max_excess.max(c.max_excess);
    }
    let comparison = violations == 0;
    report.add("comparison_violations", violations);
    report.num("comparison_max_excess", max_excess);
    report.add("comparison_ok", comparison);

    let start = bar.scaled(0.5, 0.75);
    let plain = evolve(&start, CHECK_T_END, p, o)?;
    let mut cut = o.clone();
    cut.cutoff = Some(2.0 * plain.outcome.peak_norms.0.max(plain.outcome.peak_norms.1) + 1.0);
    let clipped = evolve(&start, CHECK_T_END, p, &cut)?;
    let cutoff_diff = plain.final_state.distance(&clipped.final_state);
    let cutoff = cutoff_diff <= CUTOFF_TOL;
    report.num("cutoff_difference", cutoff_diff);
    report.add("cutoff_ok", cutoff);

    let mut mismatches = 0;
    for alpha in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
        for beta in [0.25, 0.5, 1.0, 2.0] {
            for gamma in [2.0, 2.5, 3.0] {
                let q = Params::new(1.0, 1.0, alpha, beta, gamma)?;
                let bp = BracketParams::new(alpha, beta, gamma, 1.0)?;
                mismatches += usize::from(bracket_infimum(&bp).is_finite() != q.existence_conditions_hold());
            }
        }
    }
    let bracket = mismatches == 0;
    report.add("bracket_mismatches", mismatches);
    report.add("bracket_ok", bracket);

    out.series(&plain.series)?;
    out.checkpoint(&plain.final_state)?;
    out.plot("plot_norms.svg", norms_svg(&plain.series));
    out.plot("plot_profiles.svg", profiles_svg("steady state", &[("ū1", &bar.u1), ("ū2", &bar.u2)]));
    let all = positivity && comparison && cutoff && bracket;
    report.add("all_ok", all);
    Ok(if all { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

/// Nodewise `U(0, scale)·s`, an ordered nonnegative pair below `s`.
fn random_below(rng: &mut ChaCha8Rng, s: &StatePair, scale: f64) -> StatePair {
    let mut draw = |f: &Field| -> Vec<f64> { f.values().iter().map(|v| v * rng.random_range(0.0..=scale)).collect() };
    let u1 = draw(&s.u1);
    let u2 = draw(&s.u2);
    let g = s.grid();
    StatePair::new(
        Field::new(g.clone(), u1).expect("finite values"),
        Field::new(g.clone(), u2).expect("finite values"),
        0.0,
    )
    .expect("same grid")
}

pub fn initial_state(config: &RunConfig, grid: &Arc<Grid>) -> Result<StatePair> {
    match &config.initial {
        InitialSpec::Zero => Ok(StatePair::zeros(grid)),
        InitialSpec::ScaledSteady { l1, l2 } => {
            let s = find_positive_steady(grid, &config.params, 1.0, &config.options)?;
            if !s.is_positive() {
                return Err(nrrd_core::Error::State(format!(
                    "no positive steady state to scale ({:?}, residual {:.3e})",
                    s.classification, s.residual
                ))
                .into());
            }
            Ok(s.state.scaled(*l1, *l2))
        }
        InitialSpec::File(path) => load_checkpoint_on(path, grid),
        InitialSpec::Expression { u1, u2 } => {
            let f1 = Field::new(grid.clone(), eval_on_grid(u1, grid)?)?;
            let f2 = Field::new(grid.clone(), eval_on_grid(u2, grid)?)?;
            Ok(StatePair::new(f1, f2, 0.0)?)
        }
    }
}

fn eval_on_grid(expr: &str, grid: &Grid) -> Result<Vec<f64>> {
    let tree = build_operator_tree::<DefaultNumericTypes>(expr).map_err(|e| CliError::config(format!("{expr}: {e}")))?;
    (0..grid.len())
        .map(|k| {
            let [x, y] = grid.coords(k);
            let v = tree
                .eval_number_with_context(&expression_context(x, y))
                .map_err(|e| CliError::config(format!("{expr}: {e}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::config(format!("{expr} is not finite at ({x}, {y})")))
            }
        })
        .collect()
}
