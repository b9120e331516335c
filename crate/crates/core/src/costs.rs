//! Protocol functionals on variance grids and their time-domain counterparts.
//!
//! All variance-grid integrals use the index-space trapezoid rule with end
//! values extrapolated from the interior, so integrands that blow up at
//! equilibrium endpoints are never evaluated there.

use serde::{Deserialize, Serialize};

use crate::analog::duration;
use crate::dynamics::TrajectoryRecord;
use crate::error::Result;
use crate::model::{CostKind, OptimizationProblem, PhysConsts, SGridProtocol, TimeProtocol};
use crate::numerics::{extrapolate_ends, index_derivative, index_trapezoid, metric};

/// Raw functionals of one protocol and the composite objective.
///
/// `j_total` applies the multipliers to the rescaled forms that match the
/// Euler-Lagrange right-hand sides: `(2/m) f_energy`, `f_alpha / 2`, `work`
/// and `g_penalty / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub cost: CostKind,
    pub lambda: f64,
    pub mu: f64,
    pub duration: f64,
    pub f_energy: f64,
    pub f_alpha: f64,
    pub g_penalty: f64,
    pub work: f64,
    pub j_total: f64,
}

impl CostReport {
    /// The raw functional selected by `cost`.
    pub fn selected(&self) -> f64 {
        match self.cost {
            CostKind::Energy => self.f_energy,
            CostKind::Phase => self.f_alpha,
            CostKind::Work => self.work,
        }
    }
}

/// `int f ds` from interior integrand values `f(j)`.
fn open_integral(p: &SGridProtocol, f: impl Fn(usize) -> f64) -> f64 {
    let n = p.len();
    let ds = metric(p.s_nodes());
    let mut g = vec![0.0; n];
    for j in 1..n - 1 {
        g[j] = f(j) * ds[j];
    }
    extrapolate_ends(&mut g);
    index_trapezoid(&g)
}

fn boundary_term(p: &SGridProtocol) -> f64 {
    let n = p.len();
    p.s_f() * p.kbar()[n - 1] - p.s_i() * p.kbar()[0]
}

/// Time integral of the energy, `(m / 4 gamma) int [u/s + (3 D^2 gamma^2 - s^2 kbar^2)/(s u) + 2 s kbar'] ds`
/// with `u = D gamma - s kbar`; the last term is integrated by parts.
pub fn f_energy(p: &SGridProtocol, c: &PhysConsts) -> Result<f64> {
    duration(p, c)?;
    let s = p.s_nodes();
    let k = p.kbar();
    let dg = c.dg();
    let main = open_integral(p, |j| {
        let u = dg - s[j] * k[j];
        u / s[j] + (3.0 * dg * dg - s[j] * s[j] * k[j] * k[j]) / (s[j] * u)
    });
    let int_k = open_integral(p, |j| k[j]);
    Ok(c.m / (4.0 * c.gamma) * (main + 2.0 * boundary_term(p) - 2.0 * int_k))
}

/// Time integral of the squared phase coefficient, `(m^2 / 8 gamma hbar^2) int u / s^2 ds`.
pub fn f_alpha(p: &SGridProtocol, c: &PhysConsts) -> Result<f64> {
    p.check_feasible(c)?;
    let s = p.s_nodes();
    let k = p.kbar();
    let v = open_integral(p, |j| (c.dg() - s[j] * k[j]) / (s[j] * s[j]));
    Ok(c.m * c.m / (8.0 * c.gamma * c.hbar * c.hbar) * v)
}

/// Gradient penalty `int kbar'^2 ds`.
pub fn g_penalty(p: &SGridProtocol) -> f64 {
    let dk = index_derivative(p.kbar());
    let ds = metric(p.s_nodes());
    let n = p.len();
    let mut g = vec![0.0; n];
    for j in 1..n - 1 {
        g[j] = dk[j] * dk[j] / ds[j];
    }
    extrapolate_ends(&mut g);
    index_trapezoid(&g).abs()
}

/// Classical work `(1/2) int s dkbar` from and back to equilibrium: the
/// path integral `(1/2)(s_f kbar_f - s_i kbar_i) - (1/2) int kbar ds` plus the
/// jumps `kbar_eq(s_i) -> kbar_i` and `kbar_f -> kbar_eq(s_f)` at fixed variance.
pub fn work_classical(p: &SGridProtocol, c: &PhysConsts) -> f64 {
    let k = p.kbar();
    let n = p.len();
    let (s_i, s_f) = (p.s_i(), p.s_f());
    let jumps = 0.5 * s_i * (k[0] - c.dg() / s_i) + 0.5 * s_f * (c.dg() / s_f - k[n - 1]);
    -0.5 * open_integral(p, |j| k[j]) + 0.5 * boundary_term(p) + jumps
}

/// Weight that turns a raw functional into the form minimized with multiplier `lambda`.
pub fn functional_weight(cost: CostKind, c: &PhysConsts) -> f64 {
    match cost {
        CostKind::Energy => 2.0 / c.m,
        CostKind::Phase => 0.5,
        CostKind::Work => 1.0,
    }
}

/// Evaluates every functional and `J = duration + lambda w F + (mu / 2) G`.
pub fn j_total(
    p: &SGridProtocol,
    prob: &OptimizationProblem,
    c: &PhysConsts,
) -> Result<CostReport> {
    let dt = duration(p, c)?;
    let fe = f_energy(p, c)?;
    let fa = f_alpha(p, c)?;
    let g = g_penalty(p);
    let w = work_classical(p, c);
    let sel = match prob.cost {
        CostKind::Energy => fe,
        CostKind::Phase => fa,
        CostKind::Work => w,
    };
    let j = dt + prob.lambda * functional_weight(prob.cost, c) * sel + 0.5 * prob.mu * g;
    Ok(CostReport {
        cost: prob.cost,
        lambda: prob.lambda,
        mu: prob.mu,
        duration: dt,
        f_energy: fe,
        f_alpha: fa,
        g_penalty: g,
        work: w,
        j_total: j,
    })
}

fn trapezoid_t(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (0..t.len() - 1)
        .map(|k| 0.5 * (f(k) + f(k + 1)) * (t[k + 1] - t[k]))
        .sum()
}

/// `int E dt` along an Ermakov run.
pub fn energy_integral(traj: &TrajectoryRecord) -> f64 {
    trapezoid_t(&traj.t, |k| traj.energy[k])
}

/// `int alpha^2 dt` along an Ermakov run.
pub fn alpha_squared_integral(traj: &TrajectoryRecord) -> f64 {
    trapezoid_t(&traj.t, |k| traj.alpha[k] * traj.alpha[k])
}

/// Quantum work `int (1/2) s dkappa` along an Ermakov run of `kappa_t`.
pub fn quantum_work(traj: &TrajectoryRecord, kappa_t: &TimeProtocol) -> f64 {
    let k: Vec<f64> = traj.t.iter().map(|&t| kappa_t.value_at(t)).collect();
    (0..traj.len() - 1)
        .map(|i| 0.25 * (traj.s[i] + traj.s[i + 1]) * (k[i + 1] - k[i]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n)
            .map(|j| a + (b - a) * j as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn gradient_penalty_simple_cases() {
        let s = uniform(11, 1.0, 2.0);
        let flat = SGridProtocol::new(s.clone(), vec![0.3; 11]).unwrap();
        assert_eq!(g_penalty(&flat), 0.0);
        let lin = SGridProtocol::new(s.clone(), s.iter().map(|v| 0.7 - 0.4 * v).collect()).unwrap();
        assert!((g_penalty(&lin) - 0.16).abs() < 1e-14);
        let k: Vec<f64> = s.iter().map(|v| v.sin()).collect();
        let p1 = SGridProtocol::new(s.clone(), k.clone()).unwrap();
        let p2 = SGridProtocol::new(s, k.iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((g_penalty(&p2) - 4.0 * g_penalty(&p1)).abs() < 1e-14);
    }

    #[test]
    fn constant_stiffness_work_is_the_jumps() {
        let c = PhysConsts::natural_units();
        let p = SGridProtocol::new(uniform(21, 1.0, 2.0), vec![0.4; 21]).unwrap();
        // only the two jumps: (1/2)(0.4 - 1) + (1/2)(1 - 0.8)
        assert!((work_classical(&p, &c) + 0.2).abs() < 1e-14);
    }

    #[test]
    fn zero_multipliers_leave_duration() {
        let c = PhysConsts::natural_units();
        let s = uniform(101, 1.0, 2.0);
        let k = s.iter().map(|v| 0.5 / v).collect();
        let p = SGridProtocol::new(s, k).unwrap();
        let prob = OptimizationProblem::new(CostKind::Energy, 0.0, 0.0, 1.0, 2.0, 101).unwrap();
        let r = j_total(&p, &prob, &c).unwrap();
        assert_eq!(r.j_total, r.duration);
        // u = 0.5 everywhere: duration = (1/2)(1)/0.5 = 1
        assert!((r.duration - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_functional_sign() {
        let c = PhysConsts::natural_units();
        let s = uniform(51, 2.0, 1.0);
        let k = s.iter().map(|v| 1.5 / v).collect();
        let p = SGridProtocol::new(s, k).unwrap();
        // compression: u < 0 and ds < 0 give a positive value
        assert!(f_alpha(&p, &c).unwrap() > 0.0);
    }
}
