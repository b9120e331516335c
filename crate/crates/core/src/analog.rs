//! Classical analog: variance evolution, the classical-to-quantum stiffness
//! map, and conversion of variance-grid protocols to the time domain.

use crate::error::{Error, Result};
use crate::model::{PhysConsts, ProtocolKind, SGridProtocol, TimeProtocol};
use crate::numerics::{
    cumulative_index_trapezoid, derivative, extrapolate_ends, hermite, index_derivative,
    index_trapezoid, invert_pchip, metric, pchip_slopes,
};

/// Below this fraction of `D gamma`, an endpoint is treated as sitting on the equilibrium curve.
const EQUILIBRIUM_EPS: f64 = 1e-9;
/// Endpoint vanishing exponent of `D gamma - s kbar` at which the duration integral diverges.
const DIVERGENT_EXPONENT: f64 = 0.95;

/// Variance rate `(2 / gamma)(D gamma - kbar s)`.
pub fn variance_rate(s: f64, kbar: f64, c: &PhysConsts) -> f64 {
    2.0 / c.gamma * (c.dg() - kbar * s)
}

/// Variance and its rate sampled on the nodes of a classical protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub sdot: Vec<f64>,
}

/// RK4 integration of the variance law under `kbar_t`, interpolated linearly
/// between nodes. Each node interval is split into substeps no longer than `dt`
/// and the result is reported at the protocol nodes.
pub fn evolve_variance(
    kbar_t: &TimeProtocol,
    s_start: f64,
    c: &PhysConsts,
    dt: f64,
) -> Result<VarianceTrajectory> {
    if !(s_start.is_finite() && s_start > 0.0) {
        return Err(Error::Domain(format!(
            "initial variance must be positive, got {s_start}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let tn = kbar_t.t_nodes();
    let kv = kbar_t.values();
    let n = tn.len();
    let mut s_out = Vec::with_capacity(n);
    let mut s = s_start;
    s_out.push(s);
    for k in 0..n - 1 {
        let (t0, t1) = (tn[k], tn[k + 1]);
        let (k0, k1) = (kv[k], kv[k + 1]);
        let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        let kb = |tau: f64| k0 + (k1 - k0) * (tau - t0) / (t1 - t0);
        let f = |tau: f64, s: f64| variance_rate(s, kb(tau), c);
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            let a = f(t, s);
            let b = f(t + 0.5 * h, s + 0.5 * h * a);
            let cc = f(t + 0.5 * h, s + 0.5 * h * b);
            let d = f(t + h, s + h * cc);
            s += h / 6.0 * (a + 2.0 * b + 2.0 * cc + d);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::IntegrationFailure {
                    t: t + h,
                    reason: format!("variance left (0, inf): {s}"),
                });
            }
        }
        s_out.push(s);
    }
    let sdot = s_out
        .iter()
        .zip(kv)
        .map(|(s, k)| variance_rate(*s, *k, c))
        .collect();
    Ok(VarianceTrajectory {
        t: tn.to_vec(),
        s: s_out,
        sdot,
    })
}

/// Quantum stiffness `hbar^2/(2 m s^2) + (m/gamma) dkbar/dt - (m/gamma^2) kbar^2`
/// on the nodes of `kbar_t`.
pub fn quantum_from_classical_t(
    kbar_t: &TimeProtocol,
    s_t: &[f64],
    c: &PhysConsts,
) -> Result<TimeProtocol> {
    c.ensure_quantum()?;
    if s_t.len() != kbar_t.len() {
        return Err(Error::Shape(format!(
            "variance has {} samples but the protocol has {} nodes",
            s_t.len(),
            kbar_t.len()
        )));
    }
    if kbar_t.len() < 3 {
        return Err(Error::Shape("need at least 3 time nodes".into()));
    }
    let kb = kbar_t.values();
    let kdot = derivative(kbar_t.t_nodes(), kb);
    let (h, m, g) = (c.hbar, c.m, c.gamma);
    let kappa = (0..kb.len())
        .map(|j| {
            h * h / (2.0 * m * s_t[j] * s_t[j]) + m / g * kdot[j] - m / (g * g) * kb[j] * kb[j]
        })
        .collect();
    TimeProtocol::new(kbar_t.t_nodes().to_vec(), kappa, ProtocolKind::Quantum)
}

/// Quantum stiffness at one variance from `kbar` and its slope `dkbar/ds`:
/// `hbar^2/(2 m s^2) + (2 m / gamma^2)(D gamma - s kbar) dkbar/ds - (m/gamma^2) kbar^2`.
pub fn quantum_stiffness(s: f64, kbar: f64, dkbar_ds: f64, c: &PhysConsts) -> f64 {
    let (h, m, g) = (c.hbar, c.m, c.gamma);
    let u = c.dg() - s * kbar;
    h * h / (2.0 * m * s * s) + 2.0 * m / (g * g) * u * dkbar_ds - m / (g * g) * kbar * kbar
}

/// Quantum stiffness on the variance nodes of `p`.
pub fn quantum_from_classical_s(p: &SGridProtocol, c: &PhysConsts) -> Result<Vec<f64>> {
    c.ensure_quantum()?;
    let s = p.s_nodes();
    let kb = p.kbar();
    let kp = derivative(s, kb);
    Ok((0..s.len())
        .map(|j| quantum_stiffness(s[j], kb[j], kp[j], c))
        .collect())
}

/// Rejects protocols whose duration integral diverges at an equilibrium endpoint.
fn check_endpoint_divergence(p: &SGridProtocol, u: &[f64], c: &PhysConsts) -> Result<()> {
    let s = p.s_nodes();
    let n = s.len();
    if n < 3 {
        return Ok(());
    }
    let interior_max = u[1..n - 1].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if interior_max <= EQUILIBRIUM_EPS * c.dg() {
        return Err(Error::Infeasible {
            s: s[n / 2],
            reason: "protocol lies on the equilibrium curve; the transfer time diverges".into(),
        });
    }
    for (e, j1, j2) in [(0, 1, 2), (n - 1, n - 2, n - 3)] {
        if u[e].abs() > EQUILIBRIUM_EPS * c.dg() {
            continue;
        }
        let x1 = (s[j1] - s[e]).abs();
        let x2 = (s[j2] - s[e]).abs();
        let ratio = u[j2].abs() / u[j1].abs();
        let expo = ratio.ln() / (x2 / x1).ln();
        if !expo.is_finite() || expo >= DIVERGENT_EXPONENT {
            return Err(Error::Infeasible {
                s: s[e],
                reason: format!(
                    "D*gamma - s*kbar vanishes like |s - s_end|^{expo:.3} at the endpoint; the transfer time diverges"
                ),
            });
        }
    }
    Ok(())
}

/// Index-space samples `g_j = (gamma / 2) / (D gamma - s_j kbar_j) * ds/dj`,
/// with the end values extrapolated from the interior.
fn dt_per_index(p: &SGridProtocol, c: &PhysConsts) -> Result<Vec<f64>> {
    p.check_feasible(c)?;
    let u = p.u(c);
    check_endpoint_divergence(p, &u, c)?;
    let ds = metric(p.s_nodes());
    let mut g: Vec<f64> = u
        .iter()
        .zip(&ds)
        .map(|(u, d)| 0.5 * c.gamma / u * d)
        .collect();
    extrapolate_ends(&mut g);
    Ok(g)
}

/// Transfer time `(1/2) int gamma ds / (D gamma - s kbar)`.
pub fn duration(p: &SGridProtocol, c: &PhysConsts) -> Result<f64> {
    Ok(index_trapezoid(&dt_per_index(p, c)?))
}

/// Elapsed time at every node; starts at 0 and ends at [`duration`].
pub fn time_of_s(p: &SGridProtocol, c: &PhysConsts) -> Result<Vec<f64>> {
    let t = cumulative_index_trapezoid(&dt_per_index(p, c)?);
    if let Some(w) = t.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Infeasible {
            s: f64::NAN,
            reason: format!("time not increasing at t = {}", w[0]),
        });
    }
    Ok(t)
}

/// Protocol resampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomain {
    pub classical: TimeProtocol,
    pub quantum: TimeProtocol,
    pub s: Vec<f64>,
    pub sdot: Vec<f64>,
    pub duration: f64,
}

/// Resamples `kbar(s)`, `kappa(s)` and `s` onto `n_t` uniform times in `[0, duration]`.
pub fn to_time_domain(p: &SGridProtocol, c: &PhysConsts, n_t: usize) -> Result<TimeDomain> {
    if n_t < 3 {
        return Err(Error::Shape(format!(
            "need at least 3 time samples, got {n_t}"
        )));
    }
    let t_nodes = time_of_s(p, c)?;
    let kappa_nodes = quantum_from_classical_s(p, c)?;
    let total = *t_nodes.last().unwrap();
    let n = p.len();

    let mt = pchip_slopes(&t_nodes);
    let ms = pchip_slopes(p.s_nodes());
    let mk = index_derivative(p.kbar());
    let mq = index_derivative(&kappa_nodes);

    let mut times = Vec::with_capacity(n_t);
    let mut s = Vec::with_capacity(n_t);
    let mut kbar = Vec::with_capacity(n_t);
    let mut kappa = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let t = total * k as f64 / (n_t - 1) as f64;
        let (sj, kj, qj) = if k == 0 {
            (p.s_i(), p.kbar()[0], kappa_nodes[0])
        } else if k == n_t - 1 {
            (p.s_f(), p.kbar()[n - 1], kappa_nodes[n - 1])
        } else {
            let jf = invert_pchip(&t_nodes, &mt, t);
            (
                hermite(p.s_nodes(), &ms, jf),
                hermite(p.kbar(), &mk, jf),
                hermite(&kappa_nodes, &mq, jf),
            )
        };
        times.push(t);
        s.push(sj);
        kbar.push(kj);
        kappa.push(qj);
    }
    let sdot = s
        .iter()
        .zip(&kbar)
        .map(|(s, k)| variance_rate(*s, *k, c))
        .collect();
    Ok(TimeDomain {
        classical: TimeProtocol::new(times.clone(), kbar, ProtocolKind::Classical)?,
        quantum: TimeProtocol::new(times, kappa, ProtocolKind::Quantum)?,
        s,
        sdot,
        duration: total,
    })
}
