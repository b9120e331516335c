mod common;

use common::{natural, rel, solve};
use nelson_sta::analog::duration;
use nelson_sta::numerics::derivative;
use nelson_sta::solver::{analytic_work_optimal, bvp_residual, solve_bvp, BvpOptions};
use nelson_sta::{CostKind, OptimizationProblem, SGridProtocol};
use proptest::prelude::*;

fn work_deviation(p: &SGridProtocol, lambda: f64, lo: f64, hi: f64) -> f64 {
    let w = analytic_work_optimal(lambda, p.s_i(), p.s_f(), &natural()).unwrap();
    p.s_nodes()
        .iter()
        .zip(p.kbar())
        .filter(|(s, _)| **s >= lo && **s <= hi)
        .map(|(s, k)| (k - w.kbar_of_s(*s)).abs())
        .fold(0.0, f64::max)
}

fn max_slope(p: &SGridProtocol) -> f64 {
    derivative(p.s_nodes(), p.kbar())
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[test]
fn residual_and_boundaries() {
    let c = natural();
    let opts = BvpOptions::default();
    for cost in [CostKind::Energy, CostKind::Phase, CostKind::Work] {
        for (s_i, s_f) in [(1.0, 2.0), (2.0, 1.0), (0.5, 0.25)] {
            let prob = OptimizationProblem::new(cost, 1.0, 0.2, s_i, s_f, 2001).unwrap();
            let sol = solve_bvp(&prob, &opts, &c).unwrap();
            assert!(
                sol.residual <= 10.0 * opts.tol,
                "{cost} {s_i}->{s_f}: {}",
                sol.residual
            );
            let recheck = bvp_residual(&sol.protocol, &prob, &c).unwrap();
            assert_eq!(recheck, sol.residual);
            let k = sol.protocol.kbar();
            assert!((k[0] * s_i - c.dg()).abs() <= 2.0 * f64::EPSILON);
            assert!((k[2000] * s_f - c.dg()).abs() <= 2.0 * f64::EPSILON);
            sol.protocol.check_feasible(&c).unwrap();
            assert!(*sol.history.last().unwrap() < opts.tol);
        }
    }
}

#[test]
fn grid_refinement_is_second_order() {
    let c = natural();
    for (cost, mu) in [
        (CostKind::Energy, 0.1),
        (CostKind::Phase, 0.5),
        (CostKind::Work, 0.05),
    ] {
        let d: Vec<f64> = [501, 1001, 2001]
            .iter()
            .map(|&n| duration(&solve(cost, 1.0, mu, 1.0, 2.0, n), &c).unwrap())
            .collect();
        let ratio = (d[0] - d[1]) / (d[1] - d[2]);
        println!("{cost} mu={mu}: durations {d:?} ratio {ratio:.3}");
        assert!((3.5..=4.5).contains(&ratio), "{cost}: ratio {ratio}");
    }
}

#[test]
fn work_solution_tracks_closed_form_as_lambda_grows() {
    let mut prev = f64::INFINITY;
    for lam in [0.5, 1.0, 3.0, 10.0] {
        let p = solve(CostKind::Work, lam, 0.01, 1.0, 2.0, 2001);
        let dev = work_deviation(&p, lam, 1.2, 1.8);
        println!("lambda {lam}: interior deviation {dev:.3e}");
        assert!(dev < prev);
        prev = dev;
    }
}

#[test]
fn small_mu_work_solution_approaches_closed_form() {
    let devs: Vec<f64> = [0.01, 0.001]
        .iter()
        .map(|&mu| {
            work_deviation(
                &solve(CostKind::Work, 1.0, mu, 1.0, 2.0, 4001),
                1.0,
                1.2,
                1.8,
            )
        })
        .collect();
    println!("deviations {devs:?}");
    assert!(devs[1] < devs[0]);
    assert!(devs[1] < 0.02);
}

#[test]
fn larger_mu_gives_flatter_protocols() {
    for cost in [CostKind::Energy, CostKind::Phase] {
        let mut prev = f64::INFINITY;
        for mu in [0.05, 0.1, 0.5, 1.0, 2.0] {
            let g = max_slope(&solve(cost, 1.0, mu, 1.0, 2.0, 2001));
            assert!(g <= prev, "{cost} mu {mu}: {g} > {prev}");
            prev = g;
        }
    }
}

#[test]
fn expansion_dips_below_equilibrium() {
    let c = natural();
    let p = solve(CostKind::Phase, 1.0, 0.5, 1.0, 2.0, 2001);
    for (s, k) in p.s_nodes().iter().zip(p.kbar()).skip(1).take(1999) {
        assert!(*k < c.dg() / s);
    }
}

#[test]
fn solution_does_not_depend_on_iteration_controls() {
    let c = natural();
    let prob = OptimizationProblem::new(CostKind::Energy, 2.0, 0.05, 1.0, 2.0, 2001).unwrap();
    let a = solve_bvp(&prob, &BvpOptions::default(), &c).unwrap();
    let opts = BvpOptions {
        relaxation: 1.0,
        init_amplitude: 0.1,
        ..BvpOptions::default()
    };
    let b = solve_bvp(&prob, &opts, &c).unwrap();
    for (x, y) in a.protocol.kbar().iter().zip(b.protocol.kbar()) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn iteration_budget_is_reported() {
    let c = natural();
    let prob = OptimizationProblem::new(CostKind::Energy, 1.0, 0.1, 1.0, 2.0, 2001).unwrap();
    let opts = BvpOptions {
        max_iter: 3,
        ..BvpOptions::default()
    };
    match solve_bvp(&prob, &opts, &c) {
        Err(nelson_sta::Error::NoConvergence {
            iterations,
            history,
        }) => {
            assert_eq!(iterations, 3);
            assert_eq!(history.len(), 3);
        }
        other => panic!("expected a convergence error, got {other:?}"),
    }
}

#[test]
fn compression_mirrors_expansion_ordering() {
    let c = natural();
    let short = duration(&solve(CostKind::Energy, 1.0, 0.1, 2.0, 1.0, 2001), &c).unwrap();
    let long = duration(&solve(CostKind::Energy, 1.0, 1.0, 2.0, 1.0, 2001), &c).unwrap();
    assert!(short > 0.0 && long > short);
    assert!(rel(short, long) > 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converges_across_parameters(
        lam in 0.0f64..20.0, log_mu in -3.0f64..0.5, s_i in 0.3f64..3.0, ratio in 0.3f64..3.0,
        cost in prop_oneof![Just(CostKind::Energy), Just(CostKind::Phase), Just(CostKind::Work)],
    ) {
        prop_assume!((ratio - 1.0).abs() > 0.05);
        let c = natural();
        let prob = OptimizationProblem::new(cost, lam, 10f64.powf(log_mu), s_i, s_i * ratio, 1001).unwrap();
        let opts = BvpOptions::default();
        let sol = solve_bvp(&prob, &opts, &c).unwrap();
        prop_assert!(sol.residual <= 10.0 * opts.tol);
        sol.protocol.check_feasible(&c).unwrap();
        prop_assert!(duration(&sol.protocol, &c).unwrap() > 0.0);
    }
}
