use nrrd_core::evolve::evolve;
use nrrd_core::functionals::{
    bracket_infimum, temperature_identity_residual, neutron_identity_residual, weighted_boundary, weighted_mass, BracketParams,
    Infimum,
};
use nrrd_core::spectral::{robin_eigenpair, Normalization};
use nrrd_core::steady::{find_positive_steady, steady_residual};
use nrrd_core::{Field, Grid, Params, SolverOptions, StatePair};
use proptest::prelude::*;

fn reference() -> Params {
    Params::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap()
}

#[test]
fn weighted_mass_examples() {
    let g = Grid::unit_interval(51).unwrap();
    let l1 = robin_eigenpair(&g, 1.0, Normalization::L1Unit).unwrap().phi1;
    let l2 = robin_eigenpair(&g, 1.0, Normalization::L2Unit).unwrap().phi1;
    assert_eq!(weighted_mass(&Field::zeros(&g), &l1).unwrap(), 0.0);
    assert!((weighted_mass(&Field::constant(&g, 1.0), &l1).unwrap() - 1.0).abs() < 1e-12);
    assert!((weighted_mass(&l2, &l2).unwrap() - 1.0).abs() < 1e-12);
    let b = weighted_boundary(&Field::constant(&g, 1.0), 4.5, &l1).unwrap();
    assert!((b - l1.integrate_boundary().unwrap()).abs() < 1e-14);
}

fn closed_form_quadratic(alpha: f64, beta: f64, s0: f64) -> f64 {
    // (β − α/2) s² + (α − β) s₀ s on s ≥ 0
    let a = beta - 0.5 * alpha;
    let b = (alpha - beta) * s0;
    if b >= 0.0 {
        0.0
    } else {
        -b * b / (4.0 * a)
    }
}

#[test]
fn bracket_finite_iff_condition() {
    let mut checked = 0;
    for i in 0..20 {
        let ratio = 0.25 * i as f64; // α/β in [0, 4.75]
        for j in 0..20 {
            let gamma = 2.0 + 0.25 * j as f64;
            for s0 in [0.5, 1.7, 6.0] {
                let beta = 0.8;
                let alpha = ratio * beta;
                let params = Params::new(1.0, 1.0, alpha, beta, gamma).unwrap();
                let inf = bracket_infimum(&BracketParams::new(alpha, beta, gamma, s0).unwrap());
                assert_eq!(inf.is_finite(), params.existence_conditions_hold(), "α/β={ratio} γ={gamma} s₀={s0}");
                if let Infimum::Finite { value, argmin } = inf {
                    assert!(value <= 0.0);
                    let bp = BracketParams::new(alpha, beta, gamma, s0).unwrap();
                    // no lower value anywhere on a wide probe
                    for k in 0..=4000 {
                        let s = k as f64 * 0.01;
                        assert!(bp.eval(s) >= value - 1e-9, "s={s}");
                    }
                    assert!((bp.eval(argmin) - value).abs() < 1e-12);
                    if gamma == 2.0 {
                        assert!((value - closed_form_quadratic(alpha, beta, s0)).abs() < 1e-9);
                    }
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 1200);
}

#[test]
fn identities_vanish_on_zero_run() {
    let g = Grid::unit_interval(21).unwrap();
    let run = evolve(&StatePair::zeros(&g), 1.0, &reference(), &SolverOptions::default()).unwrap();
    assert_eq!(temperature_identity_residual(&run.series, &reference(), 1.0).unwrap(), 0.0);
    assert_eq!(neutron_identity_residual(&run.series, &reference(), 1.0).unwrap(), 0.0);
}

#[test]
fn temperature_identity_needs_gamma_two() {
    let g = Grid::unit_interval(21).unwrap();
    let run = evolve(&StatePair::zeros(&g), 1.0, &reference(), &SolverOptions::default()).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 1.0, 2.5).unwrap();
    assert!(temperature_identity_residual(&run.series, &p, 1.0).is_err());
    assert!(neutron_identity_residual(&run.series, &p, 1.0).is_ok());
}

#[test]
fn steady_run_reproduces_steady_defect() {
    let g = Grid::unit_interval(101).unwrap();
    let opts = SolverOptions::default();
    let s = find_positive_steady(&g, &reference(), 1.0, &opts).unwrap().state;
    let lambda1 = robin_eigenpair(&g, 1.0, Normalization::L1Unit).unwrap().lambda1;
    let run = evolve(&s, 0.5, &reference(), &opts.clone().fixed_step(0.01)).unwrap();
    let bound = 10.0 * steady_residual(&reference(), &s);
    assert!(temperature_identity_residual(&run.series, &reference(), lambda1).unwrap() <= bound);
    assert!(neutron_identity_residual(&run.series, &reference(), lambda1).unwrap() <= bound);
}

fn decaying_residuals(dt: f64) -> (f64, f64) {
    let g = Grid::unit_interval(101).unwrap();
    let p = reference();
    let s = find_positive_steady(&g, &p, 1.0, &SolverOptions::default()).unwrap().state;
    let lambda1 = robin_eigenpair(&g, 1.0, Normalization::L1Unit).unwrap().lambda1;
    let mut o = SolverOptions::default().fixed_step(dt);
    o.sample_interval = dt;
    let run = evolve(&s.scaled(0.5, 0.7), 1.0, &p, &o).unwrap();
    (
        temperature_identity_residual(&run.series, &p, lambda1).unwrap(),
        neutron_identity_residual(&run.series, &p, lambda1).unwrap(),
    )
}

#[test]
fn identity_residuals_shrink_with_dt() {
    let r: Vec<(f64, f64)> = [0.02, 0.01, 0.005].iter().map(|&dt| decaying_residuals(dt)).collect();
    println!("identity residuals per dt: {r:?}");
    for w in r.windows(2) {
        // backward Euler samples: the centered difference is off by dt/2 · d²m/dt²
        assert!((1.7..2.3).contains(&(w[0].0 / w[1].0)), "{r:?}");
        assert!((1.7..2.3).contains(&(w[0].1 / w[1].1)), "{r:?}");
    }
}

proptest! {
    #[test]
    fn weighted_mass_is_monotone(base in proptest::collection::vec(-2.0f64..2.0, 31), bump in proptest::collection::vec(0.0f64..1.0, 31)) {
        let g = Grid::unit_interval(31).unwrap();
        let phi = robin_eigenpair(&g, 0.7, Normalization::L1Unit).unwrap().phi1;
        let f = Field::new(g.clone(), base.clone()).unwrap();
        let h = Field::new(g.clone(), base.iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        prop_assert!(weighted_mass(&f, &phi).unwrap() <= weighted_mass(&h, &phi).unwrap() + 1e-14);
    }
}
