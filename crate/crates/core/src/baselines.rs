//! Reference protocols: smoothed step, quintic scale-factor shortcut, and a slow equilibrium ramp.

use crate::error::{Error, Result};
use crate::model::{PhysConsts, ProtocolKind, TimeProtocol};
use crate::numerics::smoothstep5;

/// Half-width of the default step span in units of `eps`; `tanh(8) = 1 - 2.3e-7`.
pub const STEP_HALF_SPAN: f64 = 8.0;

fn uniform_times(t0: f64, t1: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 samples, got {n}")));
    }
    if !(t1 > t0) {
        return Err(Error::Domain(format!("empty time span [{t0}, {t1}]")));
    }
    Ok((0..n)
        .map(|k| {
            if k == n - 1 {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / (n - 1) as f64
            }
        })
        .collect())
}

/// `kbar(t) = (kbar_f + kbar_i)/2 + (kbar_f - kbar_i)/2 tanh((t - tau)/eps)` on `n` uniform nodes.
pub fn step_protocol(
    kbar_i: f64,
    kbar_f: f64,
    tau: f64,
    eps: f64,
    span: (f64, f64),
    n: usize,
) -> Result<TimeProtocol> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!(
            "step width must be positive, got {eps}"
        )));
    }
    let t = uniform_times(span.0, span.1, n)?;
    let v = t
        .iter()
        .map(|&t| step_value(kbar_i, kbar_f, tau, eps, t))
        .collect();
    TimeProtocol::new(t, v, ProtocolKind::Classical)
}

pub fn step_value(kbar_i: f64, kbar_f: f64, tau: f64, eps: f64, t: f64) -> f64 {
    0.5 * (kbar_f + kbar_i) + 0.5 * (kbar_f - kbar_i) * ((t - tau) / eps).tanh()
}

/// `[tau - 8 eps, tau + 8 eps]`, with the upper end pushed out so the span lasts at least `min_len`.
pub fn step_span(tau: f64, eps: f64, min_len: f64) -> (f64, f64) {
    let t0 = tau - STEP_HALF_SPAN * eps;
    let t1 = (tau + STEP_HALF_SPAN * eps).max(t0 + min_len);
    (t0, t1)
}

/// Time between the variance leaving the `delta |s_f - s_i|` band around
/// `s_i` and its last entry into the same-width band around `s_f`.
pub fn transit_time(t: &[f64], s: &[f64], s_i: f64, s_f: f64, delta: f64) -> Option<f64> {
    let band = delta * (s_f - s_i).abs();
    let leave = t.iter().zip(s).find(|(_, &v)| (v - s_i).abs() > band)?.0;
    let last_out = s.iter().rposition(|&v| (v - s_f).abs() > band)?;
    if last_out + 1 >= t.len() {
        return None;
    }
    Some(t[last_out + 1] - leave)
}

/// Quintic scale factor `q(T) = 1 + (a - 1)(6T^5 - 15T^4 + 10T^3)` with `a = (kappa_i/kappa_f)^(1/4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChenShape {
    pub kappa_i: f64,
    pub kappa_f: f64,
    pub t_f: f64,
    pub a: f64,
    pub consts: PhysConsts,
}

impl ChenShape {
    pub fn new(kappa_i: f64, kappa_f: f64, t_f: f64, c: &PhysConsts) -> Result<Self> {
        for (name, v) in [("kappa_i", kappa_i), ("kappa_f", kappa_f), ("t_f", t_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            kappa_i,
            kappa_f,
            t_f,
            a: (kappa_i / kappa_f).powf(0.25),
            consts: *c,
        })
    }

    pub fn q(&self, t: f64) -> f64 {
        let x = t / self.t_f;
        1.0 + (self.a - 1.0) * x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }

    pub fn qdot(&self, t: f64) -> f64 {
        let x = t / self.t_f;
        (self.a - 1.0) * 30.0 * x * x * (1.0 - x) * (1.0 - x) / self.t_f
    }

    pub fn qddot(&self, t: f64) -> f64 {
        let x = t / self.t_f;
        (self.a - 1.0) * 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (self.t_f * self.t_f)
    }

    /// `kappa_i / q^4 - m qddot / q`.
    pub fn kappa(&self, t: f64) -> f64 {
        let q = self.q(t);
        self.kappa_i / q.powi(4) - self.consts.m * self.qddot(t) / q
    }

    /// Equilibrium variance of `kappa_i`.
    pub fn s_i(&self) -> f64 {
        self.consts.d * (self.consts.m / self.kappa_i).sqrt()
    }

    pub fn s(&self, t: f64) -> f64 {
        self.s_i() * self.q(t).powi(2)
    }

    pub fn sdot(&self, t: f64) -> f64 {
        2.0 * self.s_i() * self.q(t) * self.qdot(t)
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.consts.m / (4.0 * self.consts.hbar) * 2.0 * self.qdot(t) / self.q(t)
    }

    fn simpson(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = 20_000;
        let h = self.t_f / n as f64;
        let mut acc = f(0.0) + f(self.t_f);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        acc * h / 3.0
    }

    /// `int E dt` from the closed-form state.
    pub fn energy_integral(&self) -> f64 {
        self.simpson(|t| {
            crate::dynamics::energy_of(self.s(t), self.sdot(t), self.kappa(t), &self.consts)
        })
    }

    /// `int alpha^2 dt` from the closed-form state.
    pub fn alpha_squared_integral(&self) -> f64 {
        self.simpson(|t| self.alpha(t).powi(2))
    }

    pub fn protocol(&self, n: usize) -> Result<TimeProtocol> {
        let t = uniform_times(0.0, self.t_f, n)?;
        let v = t.iter().map(|&t| self.kappa(t)).collect();
        TimeProtocol::new(t, v, ProtocolKind::Quantum)
    }
}

/// Sampled quintic shortcut and its scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChenProtocol {
    pub protocol: TimeProtocol,
    pub q: Vec<f64>,
    pub shape: ChenShape,
}

pub fn chen_polynomial(
    kappa_i: f64,
    kappa_f: f64,
    t_f: f64,
    c: &PhysConsts,
    n: usize,
) -> Result<ChenProtocol> {
    c.ensure_quantum()?;
    let shape = ChenShape::new(kappa_i, kappa_f, t_f, c)?;
    let protocol = shape.protocol(n)?;
    let q = protocol.t_nodes().iter().map(|&t| shape.q(t)).collect();
    Ok(ChenProtocol { protocol, q, shape })
}

/// `kappa(t) = m D^2 / s(t)^2` along a quintic variance ramp with zero end slopes.
pub fn adiabatic_reference(
    s_i: f64,
    s_f: f64,
    t_f: f64,
    c: &PhysConsts,
    n: usize,
) -> Result<TimeProtocol> {
    c.ensure_quantum()?;
    if !(s_i > 0.0 && s_f > 0.0) {
        return Err(Error::Domain(format!(
            "variances must be positive, got {s_i}, {s_f}"
        )));
    }
    let t = uniform_times(0.0, t_f, n)?;
    let v = t
        .iter()
        .map(|&t| {
            let s = s_i + (s_f - s_i) * smoothstep5(t / t_f).0;
            c.m * c.d * c.d / (s * s)
        })
        .collect();
    TimeProtocol::new(t, v, ProtocolKind::Quantum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_limits() {
        assert_eq!(step_value(2.0, 4.0, 3.0, 0.5, 3.0), 3.0);
        assert!((step_value(2.0, 4.0, 3.0, 0.5, 30.0) - 4.0).abs() < 1e-12);
        assert!((step_value(2.0, 4.0, 3.0, 0.5, -30.0) - 2.0).abs() < 1e-12);
        assert!(step_protocol(2.0, 4.0, 0.0, 0.0, (0.0, 1.0), 10).is_err());
        let (a, b) = step_span(10.0, 1.0, 30.0);
        assert_eq!((a, b), (2.0, 32.0));
    }

    #[test]
    fn chen_boundaries() {
        let c = PhysConsts::natural_units();
        let ch = chen_polynomial(0.5, 0.125, 1.3, &c, 101).unwrap();
        let sh = ch.shape;
        assert!((sh.a - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(sh.q(0.0), 1.0);
        assert!((sh.q(1.3) - sh.a).abs() < 1e-15);
        for t in [0.0, 1.3] {
            assert!(sh.qdot(t).abs() < 1e-15 && sh.qddot(t).abs() < 1e-15);
        }
        let v = ch.protocol.values();
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[100] - 0.125).abs() < 1e-15);
        assert!((sh.s(1.3) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adiabatic_endpoints() {
        let c = PhysConsts::natural_units();
        let p = adiabatic_reference(1.0, 2.0, 10.0, &c, 51).unwrap();
        assert_eq!(p.values()[0], 0.5);
        assert_eq!(p.values()[50], 0.125);
    }

    #[test]
    fn transit_of_monotone_curve() {
        let t: Vec<f64> = (0..1001).map(|k| k as f64 * 0.01).collect();
        let s: Vec<f64> = t.iter().map(|&t| 1.0 + (1.0 - (-t).exp())).collect();
        // leaves band of 0.01 at t ~ 0.01005, enters final band at t = ln 100
        let tt = transit_time(&t, &s, 1.0, 2.0, 0.01).unwrap();
        assert!((tt - (100.0_f64.ln() - 0.01005)).abs() < 0.02);
    }
}
