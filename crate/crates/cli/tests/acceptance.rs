//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use nrrd_core::elliptic::{solve_linear_robin, solve_poisson_nonlinear_bc};
use nrrd_core::evolve::{comparison_check, evolve, OutcomeKind};
use nrrd_core::experiments::{choose_epsilon, ThresholdExperiment, PART2_T_END};
use nrrd_core::functionals::{bracket_infimum, temperature_identity_residual, BracketParams, Infimum};
use nrrd_core::spectral::{robin_eigenpair, Normalization};
use nrrd_core::steady::{find_positive_steady, find_positive_steady_from, steady_residual, Classification};
use nrrd_core::{Field, Grid, Params, SolverOptions, StatePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn reference() -> Params {
    Params::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap()
}

fn ratio_ok(r: f64) -> bool {
    (3.5..=4.5).contains(&r)
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.zip_map(b, |x, y| x - y).sup_abs()
}

fn steady_state(n: usize) -> StatePair {
    let g = Grid::unit_interval(n).unwrap();
    find_positive_steady(&g, &reference(), 1.0, &SolverOptions::default()).unwrap().state
}

/// Pair below `s`, nodewise `U(0, 1)` fractions.
fn random_below(rng: &mut ChaCha8Rng, s: &StatePair) -> StatePair {
    let g = s.grid().clone();
    let mut draw = |f: &Field| Field::new(g.clone(), f.values().iter().map(|v| v * rng.random_range(0.0..=1.0)).collect()).unwrap();
    let u1 = draw(&s.u1);
    let u2 = draw(&s.u2);
    StatePair::new(u1, u2, 0.0).unwrap()
}

fn dense_lambda1(n: usize, alpha: f64) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for e in 0..n - 1 {
        k[(e, e)] += 1.0 / h;
        k[(e + 1, e + 1)] += 1.0 / h;
        k[(e, e + 1)] -= 1.0 / h;
        k[(e + 1, e)] -= 1.0 / h;
    }
    k[(0, 0)] += alpha;
    k[(n - 1, n - 1)] += alpha;
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
    let s = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (w[i] * w[j]).sqrt());
    SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn eigenpair() {
    let start = Instant::now();
    let lam = |n: usize| robin_eigenpair(&Grid::unit_interval(n).unwrap(), 1.0, Normalization::L2Unit).unwrap().lambda1;
    let dense_err = [21, 51, 101].iter().map(|&n| (lam(n) - dense_lambda1(n, 1.0)).abs()).fold(0.0, f64::max);
    let levels = [26, 51, 101, 201];
    let lams: Vec<f64> = levels.iter().map(|&n| lam(n)).collect();
    let devs: Vec<f64> = lams.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let ratios: Vec<f64> = devs.windows(2).map(|w| w[0] / w[1]).collect();
    let secs = start.elapsed().as_secs_f64();
    let ok = dense_err < 1e-10 && ratios.iter().all(|&r| ratio_ok(r)) && secs < 5.0;
    verdict("eigenpair", ok, format!("dense error {dense_err:.2e}, level ratios {ratios:.3?}, {secs:.2}s"));
}

#[test]
fn elliptic_manufactured_solutions() {
    let levels = [11, 21, 41, 81];
    let robin: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let g = Grid::unit_interval(n).unwrap();
            let exact = Field::from_fn(&g, |x, _| 1.0 + x - x * x);
            let v = solve_linear_robin(&g, 1.0, 1.0, &exact.map(|v| 2.0 + v)).unwrap();
            sup_diff(&v, &exact)
        })
        .collect();
    let (big_f, beta, gamma) = (2.0, 1.0, 3.0);
    let parabola: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let g = Grid::unit_interval(n).unwrap();
            let v = solve_poisson_nonlinear_bc(&g, beta, gamma, &Field::constant(&g, big_f), &SolverOptions::default()).unwrap();
            let exact = Field::from_fn(&g, |x, _| 1.0 + big_f * x * (1.0 - x) / 2.0);
            sup_diff(&v, &exact)
        })
        .collect();
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[0] / w[1]).collect::<Vec<f64>>();
    let (r1, r2) = (ratios(&robin), ratios(&parabola));
    let ok = r1.iter().chain(&r2).all(|&r| ratio_ok(r));
    verdict(
        "elliptic_manufactured_solutions",
        ok,
        format!("robin errors {robin:?} ratios {r1:.3?}; parabola errors {parabola:?} ratios {r2:.3?}"),
    );
}

#[test]
fn bracket_dichotomy() {
    let mut mismatches = 0;
    let mut points = 0;
    let mut worst = 0.0f64;
    for i in 0..20 {
        for j in 0..10 {
            for k in 0..6 {
                let beta = 0.5 + 0.25 * j as f64;
                let alpha = 0.3 * i as f64 * beta;
                let gamma = 2.0 + 0.5 * k as f64;
                let s0 = 0.5 + 0.4 * i as f64;
                let p = Params::new(1.0, 1.0, alpha, beta, gamma).unwrap();
                let inf = bracket_infimum(&BracketParams::new(alpha, beta, gamma, s0).unwrap());
                mismatches += usize::from(inf.is_finite() != p.existence_conditions_hold());
                if let (Infimum::Finite { value, .. }, true) = (inf, gamma == 2.0) {
                    // (β − α/2) s² + (α − β) s₀ s
                    let (qa, qb) = (beta - 0.5 * alpha, (alpha - beta) * s0);
                    let exact = if qb >= 0.0 { 0.0 } else { -qb * qb / (4.0 * qa) };
                    worst = worst.max((value - exact).abs());
                }
                points += 1;
            }
        }
    }
    let example = match bracket_infimum(&BracketParams::new(0.0, 1.0, 2.0, 2.0).unwrap()) {
        Infimum::Finite { value, .. } => value,
        Infimum::NegInfinity => f64::NEG_INFINITY,
    };
    let ok = points == 1200 && mismatches == 0 && worst <= 1e-9 && (example + 1.0).abs() <= 1e-9;
    verdict(
        "bracket_dichotomy",
        ok,
        format!("{points} points, {mismatches} mismatches, quadratic error {worst:.2e}, example {example}"),
    );
}

#[test]
fn steady_existence_and_ordered_uniqueness() {
    let g = Grid::unit_interval(101).unwrap();
    let o = SolverOptions::default();
    let r = find_positive_steady(&g, &reference(), 1.0, &o).unwrap();
    let mut dev = 0.0f64;
    for scale in [0.5, 2.0] {
        let other = find_positive_steady_from(&reference(), &r.state.scaled(scale, scale), &o).unwrap();
        dev = dev.max(other.state.distance(&r.state));
    }
    let ok = r.classification == Classification::Positive && r.residual <= 1e-10 && dev <= 1e-6;
    verdict(
        "steady_existence_and_ordered_uniqueness",
        ok,
        format!("{:?}, residual {:.2e}, seed deviation {dev:.2e}", r.classification, r.residual),
    );
}

#[test]
fn threshold_below_steady_decays() {
    let start = Instant::now();
    let g = Grid::unit_interval(101).unwrap();
    let exp = ThresholdExperiment::new(&g, &reference(), &SolverOptions::default()).unwrap();
    let r = exp.part1(0.5, 0.75, &SolverOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = r.outcome.kind == OutcomeKind::Decayed
        && r.monotone_decay_ok == Some(true)
        && r.bounded_by_steady_ok == Some(true)
        && secs < 60.0;
    verdict(
        "threshold_below_steady_decays",
        ok,
        format!(
            "{:?} at t={}, monotone {:?}, bounded {:?}, {secs:.2}s",
            r.outcome.kind, r.outcome.t_final, r.monotone_decay_ok, r.bounded_by_steady_ok
        ),
    );
}

#[test]
fn threshold_above_steady_blows_up() {
    let g = Grid::unit_interval(101).unwrap();
    let o = SolverOptions::default();
    let exp = ThresholdExperiment::new(&g, &reference(), &o).unwrap();
    let r = exp.part2(1.5, 1.2, &o).unwrap();
    let run = exp.run(1.5, 1.2, PART2_T_END, &o).unwrap();
    let gap = run.crossing_gap(o.sample_interval);
    let eps = choose_epsilon(&exp.steady().state, 1.5, 1.2, 1.0).unwrap();
    let ok = r.outcome.kind == OutcomeKind::BlowUp
        && gap.is_some_and(|k| k <= 5)
        && r.subsolution_ok
        && r.epsilon == Some(eps);
    verdict(
        "threshold_above_steady_blows_up",
        ok,
        format!(
            "{:?}, estimate {:?}, crossing gap {gap:?} samples, subsolution {}, ε {eps}",
            r.outcome.kind, r.outcome.blowup_estimate, r.subsolution_ok
        ),
    );
}

#[test]
fn comparison_principle() {
    let bar = steady_state(51);
    let o = SolverOptions { record_snapshots: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut violations, mut worst, mut samples) = (0, 0.0f64, 0);
    for _ in 0..100 {
        let b = random_below(&mut rng, &bar);
        let a = random_below(&mut rng, &b);
        let ra = evolve(&a, 2.0, &reference(), &o).unwrap();
        let rb = evolve(&b, 2.0, &reference(), &o).unwrap();
        let c = comparison_check(&ra, &rb).unwrap();
        violations += usize::from(!c.ok);
        worst = worst.max(c.max_excess);
        samples += c.samples_checked;
    }
    verdict(
        "comparison_principle",
        violations == 0,
        format!("100 pairs, {samples} samples, {violations} violations, max excess {worst:.2e}"),
    );
}

#[test]
fn nonnegativity() {
    let g = Grid::unit_interval(51).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut min = f64::INFINITY;
    for _ in 0..100 {
        let scale = rng.random_range(0.0..10.0);
        let mut draw = || Field::new(g.clone(), (0..g.len()).map(|_| scale * rng.random_range(0.0..=1.0)).collect()).unwrap();
        let u1 = draw();
        let u2 = draw();
        let run = evolve(&StatePair::new(u1, u2, 0.0).unwrap(), 1.0, &reference(), &SolverOptions::default()).unwrap();
        min = min.min(run.min_value);
    }
    verdict("nonnegativity", min >= -1e-12, format!("100 runs, smallest nodal value {min:.3e}"));
}

#[test]
fn temperature_identity_consistency() {
    let g = Grid::unit_interval(101).unwrap();
    let p = reference();
    let bar = steady_state(101);
    let lambda1 = robin_eigenpair(&g, 1.0, Normalization::L1Unit).unwrap().lambda1;
    let residual = |dt: f64| {
        let mut o = SolverOptions::default().fixed_step(dt);
        o.sample_interval = dt;
        let run = evolve(&bar.scaled(0.5, 0.7), 1.0, &p, &o).unwrap();
        temperature_identity_residual(&run.series, &p, lambda1).unwrap()
    };
    let rs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| residual(dt)).collect();
    let ratios: Vec<f64> = rs.windows(2).map(|w| w[0] / w[1]).collect();
    let eq = evolve(&bar, 0.5, &p, &SolverOptions::default().fixed_step(0.01)).unwrap();
    let eq_res = temperature_identity_residual(&eq.series, &p, lambda1).unwrap();
    let defect = steady_residual(&p, &bar);
    let ok = ratios.iter().all(|&r| ratio_ok(r)) && eq_res <= 10.0 * defect;
    verdict(
        "temperature_identity_consistency",
        ok,
        format!("residuals {rs:?}, ratios {ratios:.3?}; equilibrium {eq_res:.2e} vs defect {defect:.2e}"),
    );
}

#[test]
fn cutoff_consistency() {
    let bar = steady_state(101);
    let o = SolverOptions::default();
    let mut worst = 0.0f64;
    for (l1, l2, t) in [(0.5, 0.75, 5.0), (1.5, 1.2, 0.8), (0.9, 1.0, 3.0)] {
        let plain = evolve(&bar.scaled(l1, l2), t, &reference(), &o).unwrap();
        let mut cut = o.clone();
        cut.cutoff = Some(2.0 * plain.outcome.peak_norms.0.max(plain.outcome.peak_norms.1));
        let clipped = evolve(&bar.scaled(l1, l2), t, &reference(), &cut).unwrap();
        worst = worst.max(plain.final_state.distance(&clipped.final_state));
    }
    verdict("cutoff_consistency", worst <= 1e-12, format!("largest final-state difference {worst:.2e}"));
}

#[test]
fn reproducible_series() {
    let configs = [
        "[problem]\ncommand = \"evolve\"\na = 1.0\nb = 1.0\nalpha = 1.0\nbeta = 1.0\ngamma = 2.5\n\n[grid]\nn = [81]\n\n[initial]\nkind = \"expression\"\nu1 = \"2 * math::sin(pi * x) + 0.5\"\nu2 = \"1\"\n\n[solver]\nt_end = 3.0\n",
        "[problem]\ncommand = \"threshold2\"\na = 1.0\nb = 1.0\nalpha = 1.0\nbeta = 1.0\ngamma = 2.0\n\n[grid]\nn = [61]\n\n[initial]\nkind = \"scaled_steady\"\nl1 = 1.5\nl2 = 1.2\n",
        "[problem]\ncommand = \"check\"\na = 1.0\nb = 1.0\nalpha = 0.5\nbeta = 1.0\ngamma = 2.0\n\n[grid]\nn = [41]\n",
    ];
    let mut identical = 0;
    for cfg in configs {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, cfg).unwrap();
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("out{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_nrrd")).arg(&path).arg("--output").arg(&out).status().unwrap();
            assert!(matches!(status.code(), Some(0 | 3)), "{status}");
            outputs.push(std::fs::read(out.join("series.csv")).unwrap());
        }
        identical += usize::from(outputs[0] == outputs[1] && outputs[0].len() > 100);
    }
    verdict("reproducible_series", identical == configs.len(), format!("{identical}/{} configs byte-identical", configs.len()));
}
