#![allow(dead_code)]

use nelson_sta::solver::{solve_bvp, BvpOptions};
use nelson_sta::{CostKind, OptimizationProblem, PhysConsts, SGridProtocol};

pub fn natural() -> PhysConsts {
    PhysConsts::natural_units()
}

pub fn solve(cost: CostKind, lambda: f64, mu: f64, s_i: f64, s_f: f64, n: usize) -> SGridProtocol {
    let prob = OptimizationProblem::new(cost, lambda, mu, s_i, s_f, n).unwrap();
    solve_bvp(&prob, &BvpOptions::default(), &natural())
        .unwrap()
        .protocol
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        50,
    )
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
