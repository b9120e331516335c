//! Euler-Lagrange boundary value problems for optimal classical protocols.
//!
//! Every right-hand side has the form `kbar'' = (A(s)/u^2 - B(s)) / (2 mu)`
//! with `u = D gamma - s kbar`. The interior solution approaches the
//! equilibrium ends like `u ~ |s - s_end|^(2/3)`, so the problem is
//! discretized on a grid clustered at both ends by a quintic smoothstep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostKind, OptimizationProblem, PhysConsts, SGridProtocol};
use crate::numerics::{smoothstep5, thomas};

/// Smallest admissible ratio `u_new / u_old` at any node in one sweep.
const U_RATIO_FLOOR: f64 = 0.2;
const MIN_DAMPING: f64 = 1e-12;
const MIN_GRID: usize = 101;

/// Controls of the iterative solver. The grid size comes from the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvpOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub relaxation: f64,
    pub init_amplitude: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: 1e-10,
            relaxation: 0.5,
            init_amplitude: 0.5,
        }
    }
}

impl BvpOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidOption(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidOption(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.init_amplitude > 0.0 && self.init_amplitude < 1.0) {
            return Err(Error::InvalidOption(format!(
                "init_amplitude must lie in (0, 1), got {}",
                self.init_amplitude
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidOption("max_iter must be positive".into()));
        }
        Ok(())
    }
}

fn denominator(s: f64, kbar: f64, c: &PhysConsts) -> Result<f64> {
    let u = c.dg() - s * kbar;
    if u == 0.0 || !u.is_finite() {
        return Err(Error::Singular { s });
    }
    Ok(u)
}

fn check_mu(prob: &OptimizationProblem) -> Result<()> {
    if prob.mu > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidOption(
            "mu must be positive for the boundary value problem".into(),
        ))
    }
}

/// `kbar''` for the time-plus-energy functional.
pub fn el_rhs_energy(s: f64, kbar: f64, prob: &OptimizationProblem, c: &PhysConsts) -> Result<f64> {
    check_mu(prob)?;
    let u = denominator(s, kbar, c)?;
    let (g, d, l) = (c.gamma, c.d, prob.lambda);
    let bracket = (g * g * s + 3.0 * d * d * g * g * l - s * s * kbar * kbar * l) / (u * u)
        - 2.0 * s * kbar * l / u
        - 3.0 * l;
    Ok(bracket / (2.0 * prob.mu * g))
}

/// `kbar''` for the time-plus-squared-phase functional.
pub fn el_rhs_phase(s: f64, kbar: f64, prob: &OptimizationProblem, c: &PhysConsts) -> Result<f64> {
    check_mu(prob)?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {s}")));
    }
    let u = denominator(s, kbar, c)?;
    let (g, m, h) = (c.gamma, c.m, c.hbar);
    Ok((g * s / (u * u) - m * m * prob.lambda / (8.0 * g * h * h * s)) / (2.0 * prob.mu))
}

/// `kbar''` for the time-plus-work functional.
pub fn el_rhs_work(s: f64, kbar: f64, prob: &OptimizationProblem, c: &PhysConsts) -> Result<f64> {
    check_mu(prob)?;
    let u = denominator(s, kbar, c)?;
    Ok((c.gamma * s / (u * u) - prob.lambda) / (2.0 * prob.mu))
}

/// Dispatches on `prob.cost`.
pub fn el_rhs(s: f64, kbar: f64, prob: &OptimizationProblem, c: &PhysConsts) -> Result<f64> {
    match prob.cost {
        CostKind::Energy => el_rhs_energy(s, kbar, prob, c),
        CostKind::Phase => el_rhs_phase(s, kbar, prob, c),
        CostKind::Work => el_rhs_work(s, kbar, prob, c),
    }
}

/// `(A, B)` with `kbar'' = (A/u^2 - B)/(2 mu)`; the energy form follows from
/// expanding `s kbar = D gamma - u` in its bracket.
pub fn rhs_coefficients(cost: CostKind, s: f64, lambda: f64, c: &PhysConsts) -> (f64, f64) {
    let g = c.gamma;
    match cost {
        CostKind::Energy => (g * s + 2.0 * lambda * c.d * c.d * g, 2.0 * lambda / g),
        CostKind::Phase => (g * s, c.m * c.m * lambda / (8.0 * g * c.hbar * c.hbar * s)),
        CostKind::Work => (g * s, lambda),
    }
}

/// Converged boundary value solution with iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub protocol: SGridProtocol,
    pub iterations: usize,
    /// Max-norm of the undamped correction at every sweep.
    pub history: Vec<f64>,
    /// Max-norm of the discrete residual in stiffness units (scaled by the squared index step).
    pub residual: f64,
}

struct Grid {
    s: Vec<f64>,
    /// `(L phi')^2`, converting `d2/ds2` to index-space second differences.
    scale: Vec<f64>,
    lower: Vec<f64>,
    mid: f64,
    upper: Vec<f64>,
}

fn stretched_grid(s_i: f64, s_f: f64, n: usize) -> Grid {
    let len = s_f - s_i;
    let h = 1.0 / (n - 1) as f64;
    let mut s = Vec::with_capacity(n);
    let mut scale = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        let xi = j as f64 * h;
        let (phi, dphi, ddphi) = smoothstep5(xi);
        s.push(if j == n - 1 { s_f } else { s_i + len * phi });
        if j > 0 && j < n - 1 {
            let r = ddphi / dphi;
            scale[j] = (len * dphi).powi(2);
            lower[j] = 1.0 / (h * h) + r / (2.0 * h);
            upper[j] = 1.0 / (h * h) - r / (2.0 * h);
        }
    }
    s[0] = s_i;
    Grid {
        s,
        scale,
        lower,
        mid: -2.0 / (h * h),
        upper,
    }
}

/// Variance nodes used by [`solve_bvp`] for `n` points between `s_i` and `s_f`.
pub fn solver_grid(s_i: f64, s_f: f64, n: usize) -> Vec<f64> {
    stretched_grid(s_i, s_f, n).s
}

fn initial_iterate(
    grid: &Grid,
    prob: &OptimizationProblem,
    opts: &BvpOptions,
    c: &PhysConsts,
) -> Vec<f64> {
    let sg = prob.orientation().sign();
    let lam = prob.lambda.max(1.0);
    let n = grid.s.len();
    let mut k: Vec<f64> = grid
        .s
        .iter()
        .map(|&s| {
            let arg = std::f64::consts::PI * (s - prob.s_i) / (prob.s_f - prob.s_i);
            c.dg() / s - opts.init_amplitude * sg * arg.sin() * (c.gamma / lam).sqrt() / s.sqrt()
        })
        .collect();
    k[0] = c.dg() / prob.s_i;
    k[n - 1] = c.dg() / prob.s_f;
    k
}

/// Solves the Euler-Lagrange equation selected by `prob.cost` with equilibrium
/// boundary values `kbar(s_end) = D gamma / s_end`.
///
/// Each sweep solves the tridiagonal system obtained by linearizing the
/// right-hand side about the current iterate (Thomas algorithm), then moves a
/// damped step towards it. The step is shortened so that `D gamma - s kbar`
/// keeps its sign and shrinks by at most a fixed factor per sweep, which keeps
/// every iterate off the singular manifold. For compressions the right-hand
/// side carries the orientation sign so that the transfer time stays positive.
pub fn solve_bvp(
    prob: &OptimizationProblem,
    opts: &BvpOptions,
    c: &PhysConsts,
) -> Result<BvpSolution> {
    opts.validate()?;
    check_mu(prob)?;
    if prob.n_grid < MIN_GRID {
        return Err(Error::InvalidOption(format!(
            "n_grid must be at least {MIN_GRID}, got {}",
            prob.n_grid
        )));
    }
    let n = prob.n_grid;
    let sg = prob.orientation().sign();
    let grid = stretched_grid(prob.s_i, prob.s_f, n);
    let mut k = initial_iterate(&grid, prob, opts, c);
    let mut history = Vec::new();

    let mut lo = vec![0.0; n - 2];
    let mut di = vec![0.0; n - 2];
    let mut up = vec![0.0; n - 2];
    let mut rhs = vec![0.0; n - 2];

    for iter in 1..=opts.max_iter {
        for j in 1..n - 1 {
            let s = grid.s[j];
            let u = c.dg() - s * k[j];
            let (a, b) = rhs_coefficients(prob.cost, s, prob.lambda, c);
            let f = sg * (a / (u * u) - b) / (2.0 * prob.mu) * grid.scale[j];
            let jac = sg * a * s / (prob.mu * u * u * u) * grid.scale[j];
            let i = j - 1;
            lo[i] = grid.lower[j];
            up[i] = grid.upper[j];
            di[i] = grid.mid - jac;
            rhs[i] = f - jac * k[j];
        }
        rhs[0] -= grid.lower[1] * k[0];
        rhs[n - 3] -= grid.upper[n - 2] * k[n - 1];
        let target = thomas(&lo, &di, &up, &rhs).map_err(|_| Error::NoConvergence {
            iterations: iter,
            history: history.clone(),
        })?;

        let mut dmax = 0.0_f64;
        let mut w_guard = f64::INFINITY;
        let mut w_node = grid.s[n / 2];
        for j in 1..n - 1 {
            let dk = target[j - 1] - k[j];
            if !dk.is_finite() {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    history,
                });
            }
            dmax = dmax.max(dk.abs());
            let u = sg * (c.dg() - grid.s[j] * k[j]);
            let du = -sg * grid.s[j] * dk;
            if du < 0.0 {
                let lim = (1.0 - U_RATIO_FLOOR) * u / -du;
                if lim < w_guard {
                    w_guard = lim;
                    w_node = grid.s[j];
                }
            }
        }
        history.push(dmax);
        // A converged sweep takes the full correction.
        let converged = dmax < opts.tol;
        let mut w = if converged { 1.0 } else { opts.relaxation }.min(w_guard);

        // Reject steps that would still cross the singular manifold.
        loop {
            if w < MIN_DAMPING {
                return Err(Error::SingularityTrap {
                    iterations: iter,
                    s: w_node,
                });
            }
            let crosses = (1..n - 1).any(|j| {
                let kn = k[j] + w * (target[j - 1] - k[j]);
                !(sg * (c.dg() - grid.s[j] * kn) > 0.0)
            });
            if !crosses {
                break;
            }
            w *= 0.5;
        }
        for j in 1..n - 1 {
            k[j] += w * (target[j - 1] - k[j]);
        }

        if converged {
            let residual = discrete_residual(&grid, &k, prob, c);
            let protocol = SGridProtocol::new(grid.s.clone(), k)?;
            protocol.check_feasible(c)?;
            return Ok(BvpSolution {
                protocol,
                iterations: iter,
                history,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        history,
    })
}

fn discrete_residual(grid: &Grid, k: &[f64], prob: &OptimizationProblem, c: &PhysConsts) -> f64 {
    let n = k.len();
    let h2 = 1.0 / ((n - 1) as f64).powi(2);
    let sg = prob.orientation().sign();
    let mut r = 0.0_f64;
    for j in 1..n - 1 {
        let s = grid.s[j];
        let u = c.dg() - s * k[j];
        let (a, b) = rhs_coefficients(prob.cost, s, prob.lambda, c);
        let f = sg * (a / (u * u) - b) / (2.0 * prob.mu) * grid.scale[j];
        let lhs = grid.lower[j] * k[j - 1] + grid.mid * k[j] + grid.upper[j] * k[j + 1];
        r = r.max(((lhs - f) * h2).abs());
    }
    r
}

/// Discrete residual of an arbitrary protocol on the solver grid for `prob`.
pub fn bvp_residual(p: &SGridProtocol, prob: &OptimizationProblem, c: &PhysConsts) -> Result<f64> {
    check_mu(prob)?;
    let grid = stretched_grid(prob.s_i, prob.s_f, p.len());
    if grid
        .s
        .iter()
        .zip(p.s_nodes())
        .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs())
    {
        return Err(Error::Shape(
            "protocol is not sampled on the solver grid".into(),
        ));
    }
    Ok(discrete_residual(&grid, p.kbar(), prob, c))
}

/// Closed-form optimum of time plus work at vanishing gradient penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkOptimal {
    pub lambda: f64,
    pub s_i: f64,
    pub s_f: f64,
    pub consts: PhysConsts,
}

/// `s kbar = D gamma - sign(s_f - s_i) sqrt(gamma s / lambda)`.
pub fn analytic_work_optimal(
    lambda: f64,
    s_i: f64,
    s_f: f64,
    c: &PhysConsts,
) -> Result<WorkOptimal> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(s_i > 0.0 && s_f > 0.0) || s_i == s_f {
        return Err(Error::Domain(format!(
            "need distinct positive variances, got {s_i}, {s_f}"
        )));
    }
    Ok(WorkOptimal {
        lambda,
        s_i,
        s_f,
        consts: *c,
    })
}

impl WorkOptimal {
    fn sign(&self) -> f64 {
        if self.s_f > self.s_i {
            1.0
        } else {
            -1.0
        }
    }

    pub fn kbar_of_s(&self, s: f64) -> f64 {
        let c = &self.consts;
        (c.dg() - self.sign() * (c.gamma * s / self.lambda).sqrt()) / s
    }

    pub fn kappa_of_s(&self, s: f64) -> f64 {
        let c = &self.consts;
        c.m * c.d * c.d / (s * s)
    }

    pub fn duration(&self) -> f64 {
        (self.consts.gamma * self.lambda).sqrt() * (self.s_f.sqrt() - self.s_i.sqrt()).abs()
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        let r = self.s_i.sqrt() + self.sign() * t / (self.consts.gamma * self.lambda).sqrt();
        r * r
    }

    pub fn kbar_of_t(&self, t: f64) -> f64 {
        self.kbar_of_s(self.s_of_t(t))
    }

    pub fn kappa_of_t(&self, t: f64) -> f64 {
        self.kappa_of_s(self.s_of_t(t))
    }

    /// Samples on `n` uniformly spaced variances, endpoints included. The
    /// endpoint values are the interior branch; the equilibrium values are reached by jumps.
    pub fn protocol(&self, n: usize) -> Result<SGridProtocol> {
        if n < 3 {
            return Err(Error::Shape(format!("need at least 3 nodes, got {n}")));
        }
        let s: Vec<f64> = (0..n)
            .map(|j| {
                if j == n - 1 {
                    self.s_f
                } else {
                    self.s_i + (self.s_f - self.s_i) * j as f64 / (n - 1) as f64
                }
            })
            .collect();
        let k = s.iter().map(|&v| self.kbar_of_s(v)).collect();
        SGridProtocol::new(s, k)
    }
}
