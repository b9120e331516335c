mod common;

use common::{natural, rel, solve};
use nelson_sta::analog::to_time_domain;
use nelson_sta::costs::{
    alpha_squared_integral, energy_integral, f_alpha, f_energy, g_penalty, j_total, quantum_work,
    work_classical,
};
use nelson_sta::dynamics::{default_dt, integrate_ermakov};
use nelson_sta::{CostKind, OptimizationProblem, SGridProtocol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn variance_grid_functionals_match_time_integrals() {
    let c = natural();
    for (cost, lam, mu, s_i, s_f) in [
        (CostKind::Energy, 1.0, 0.1, 1.0, 2.0),
        (CostKind::Phase, 1.0, 0.5, 1.0, 2.0),
        (CostKind::Energy, 1.0, 0.3, 2.0, 1.0),
        (CostKind::Work, 1.0, 0.05, 1.0, 2.0),
    ] {
        let p = solve(cost, lam, mu, s_i, s_f, 2001);
        let td = to_time_domain(&p, &c, 4001).unwrap();
        let rec = integrate_ermakov(&td.quantum, s_i, &c, default_dt(&td.quantum)).unwrap();
        let fe = f_energy(&p, &c).unwrap();
        let fa = f_alpha(&p, &c).unwrap();
        assert!(
            rel(fe, energy_integral(&rec)) < 1e-3,
            "{cost}: {fe} vs {}",
            energy_integral(&rec)
        );
        assert!(
            rel(fa, alpha_squared_integral(&rec)) < 1e-3,
            "{cost}: {fa} vs {}",
            alpha_squared_integral(&rec)
        );
        // both protocols start and end at rest, so the quantum work is E_f - E_i
        let w = quantum_work(&rec, &td.quantum);
        let de = rec.energy.last().unwrap() - rec.energy[0];
        assert!((w - de).abs() < 1e-3, "{cost}: {w} vs {de}");
    }
}

#[test]
fn classical_work_of_equilibrium_path() {
    let c = natural();
    // along kbar = D gamma / s at every node the work is the free-energy change D gamma ln(s_i/s_f)/2
    let n = 401;
    let s: Vec<f64> = (0..n).map(|j| 1.0 + j as f64 / (n - 1) as f64).collect();
    let k = s.iter().map(|v| 1.0 / v).collect();
    let p = SGridProtocol::new(s, k).unwrap();
    let w = work_classical(&p, &c);
    assert!((w - 0.5 * (0.5_f64).ln()).abs() < 1e-6, "{w}");
}

fn perturbed(p: &SGridProtocol, eps: f64, k: u32) -> SGridProtocol {
    let (a, b) = (p.s_i(), p.s_f());
    let kb = p
        .s_nodes()
        .iter()
        .zip(p.kbar())
        .map(|(s, v)| {
            let x = (s - a) / (b - a);
            v + eps * (k as f64 * std::f64::consts::PI * x).sin() * x * (1.0 - x)
        })
        .collect();
    SGridProtocol::new(p.s_nodes().to_vec(), kb).unwrap()
}

#[test]
fn optimum_beats_random_perturbations() {
    let c = natural();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (cost, lam, mu) in [
        (CostKind::Energy, 1.0, 0.1),
        (CostKind::Phase, 1.0, 0.5),
        (CostKind::Work, 1.0, 0.2),
    ] {
        let prob = OptimizationProblem::new(cost, lam, mu, 1.0, 2.0, 1001).unwrap();
        let p = solve(cost, lam, mu, 1.0, 2.0, 1001);
        let j0 = j_total(&p, &prob, &c).unwrap().j_total;
        let mut tried = 0;
        while tried < 200 {
            let eps = rng.random_range(-0.05..0.05);
            let k = rng.random_range(1..=5);
            let q = perturbed(&p, eps, k);
            let Ok(r) = j_total(&q, &prob, &c) else {
                continue;
            };
            tried += 1;
            assert!(
                r.j_total >= j0 - 1e-9,
                "{cost} eps={eps} k={k}: {} < {j0}",
                r.j_total
            );
        }
    }
}

#[test]
fn energy_functional_trends() {
    let c = natural();
    let fe = |lam: f64, mu: f64| {
        f_energy(&solve(CostKind::Energy, lam, mu, 1.0, 2.0, 1001), &c).unwrap()
    };
    let by_mu: Vec<f64> = [0.05, 0.1, 0.5, 1.0, 3.0]
        .iter()
        .map(|&m| fe(1.0, m))
        .collect();
    assert!(by_mu.windows(2).all(|w| w[1] > w[0]), "{by_mu:?}");
    let by_lam: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|&l| fe(l, 0.1)).collect();
    assert!(by_lam.windows(2).all(|w| w[1] < w[0]), "{by_lam:?}");
}

#[test]
fn objective_components_nonnegative() {
    let c = natural();
    for cost in [CostKind::Energy, CostKind::Phase, CostKind::Work] {
        for (s_i, s_f) in [(1.0, 2.0), (2.0, 1.0)] {
            let prob = OptimizationProblem::new(cost, 1.0, 0.2, s_i, s_f, 501).unwrap();
            let p = solve(cost, 1.0, 0.2, s_i, s_f, 501);
            let r = j_total(&p, &prob, &c).unwrap();
            assert!(r.duration > 0.0 && r.f_energy > 0.0 && r.f_alpha > 0.0 && r.g_penalty >= 0.0);
            assert!(r.j_total > r.duration);
            assert_eq!(r.g_penalty, g_penalty(&p));
        }
    }
}

#[test]
fn functionals_converge_under_refinement() {
    let c = natural();
    let vals = |n: usize| {
        let p = solve(CostKind::Energy, 1.0, 0.1, 1.0, 2.0, n);
        [
            f_energy(&p, &c).unwrap(),
            f_alpha(&p, &c).unwrap(),
            g_penalty(&p),
        ]
    };
    let (a, b, d) = (vals(401), vals(801), vals(1601));
    for q in 0..3 {
        let ratio = (a[q] - b[q]).abs() / (b[q] - d[q]).abs();
        assert!(ratio > 3.0, "functional {q}: ratio {ratio}");
    }
}

#[test]
fn closed_form_work_includes_endpoint_jumps() {
    let c = natural();
    let w = nelson_sta::solver::analytic_work_optimal(2.0, 1.0, 2.0, &c).unwrap();
    let p = w.protocol(2001).unwrap();
    // with equilibrium end states the boundary terms cancel: W = -(1/2) int kbar ds
    let oracle = -0.5 * common::simpson(&|s| w.kbar_of_s(s), 1.0, 2.0, 1e-13);
    assert!((work_classical(&p, &c) - oracle).abs() < 1e-6);
}
