//! Exact Gaussian quantum dynamics via the Ermakov equation, plus energy,
//! phase-space and drift diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{alpha_of, PhysConsts, TimeProtocol};
use crate::numerics::lerp;

/// Default number of RK4 steps across a protocol.
pub const DEFAULT_STEPS: usize = 10_000;

/// Sampled solution of the Ermakov equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub sdot: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub energy: Vec<f64>,
    /// Stiffness seen by the integrator at each sample.
    pub kappa: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn s_at(&self, t: f64) -> f64 {
        lerp(&self.t, &self.s, t)
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        lerp(&self.t, &self.alpha, t)
    }

    pub fn final_s(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    pub fn final_sdot(&self) -> f64 {
        self.sdot[self.sdot.len() - 1]
    }
}

/// `dt` giving [`DEFAULT_STEPS`] steps across the protocol.
pub fn default_dt(p: &TimeProtocol) -> f64 {
    p.span() / DEFAULT_STEPS as f64
}

/// RK4 integration of `sigma'' + (kappa/m) sigma = 4 D^2 / sigma^3` from rest,
/// with `sigma = sqrt(2 s)` and the geometric phase `beta' = -hbar / (4 m s)`.
pub fn integrate_ermakov(
    kappa_t: &TimeProtocol,
    s_start: f64,
    c: &PhysConsts,
    dt: f64,
) -> Result<TrajectoryRecord> {
    c.ensure_quantum()?;
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
    let t0 = kappa_t.t_start();
    let steps = (kappa_t.span() / dt).ceil().max(1.0) as usize;
    let h = kappa_t.span() / steps as f64;
    let (m, d2) = (c.m, c.d * c.d);
    let kap = |t: f64| kappa_t.value_at(t);
    let rhs = |t: f64, y: [f64; 3]| -> [f64; 3] {
        let sig = y[0];
        [
            y[1],
            4.0 * d2 / (sig * sig * sig) - kap(t) / m * sig,
            -c.hbar / (2.0 * m * sig * sig),
        ]
    };

    let mut rec = TrajectoryRecord {
        t: Vec::with_capacity(steps + 1),
        s: Vec::with_capacity(steps + 1),
        sdot: Vec::with_capacity(steps + 1),
        alpha: Vec::with_capacity(steps + 1),
        beta: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        kappa: Vec::with_capacity(steps + 1),
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, y: [f64; 3]| -> Result<()> {
        let s = 0.5 * y[0] * y[0];
        let sdot = y[0] * y[1];
        let k = kap(t);
        rec.t.push(t);
        rec.s.push(s);
        rec.sdot.push(sdot);
        rec.alpha.push(alpha_of(s, sdot, c)?);
        rec.beta.push(y[2]);
        rec.energy.push(energy_of(s, sdot, k, c));
        rec.kappa.push(k);
        Ok(())
    };

    let mut y = [(2.0 * s_start).sqrt(), 0.0, 0.0];
    push(&mut rec, t0, y)?;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = rhs(t + h, add(y, k3, h));
        for q in 0..3 {
            y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
        }
        let tn = if i + 1 == steps {
            kappa_t.t_end()
        } else {
            t0 + (i + 1) as f64 * h
        };
        if !(y[0].is_finite() && y[0] > 0.0 && y[1].is_finite()) {
            return Err(Error::IntegrationFailure {
                t: tn,
                reason: format!("width collapsed: sigma = {}", y[0]),
            });
        }
        push(&mut rec, tn, y)?;
    }
    Ok(rec)
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// `E = (m / 4s)(sdot^2 / 2 + 2 s^2 kappa / m + 2 D^2)`.
pub fn energy_of(s: f64, sdot: f64, kappa: f64, c: &PhysConsts) -> f64 {
    c.m / (4.0 * s) * (0.5 * sdot * sdot + 2.0 * s * s * kappa / c.m + 2.0 * c.d * c.d)
}

/// Wigner function of the Gaussian state, normalized to one over phase space.
pub fn wigner_at(x: f64, p: f64, s: f64, alpha: f64, c: &PhysConsts) -> f64 {
    let h = c.hbar;
    let dp = p - 2.0 * alpha * h * x;
    (-x * x / (2.0 * s) - 2.0 * s / (h * h) * dp * dp).exp() / (PI * h)
}

/// Tilt of the Wigner ellipse, `atan(2 alpha hbar / (m omega_i))`.
pub fn tilt_angle(alpha: f64, c: &PhysConsts, omega_i: f64) -> Result<f64> {
    if !(omega_i.is_finite() && omega_i > 0.0) {
        return Err(Error::Domain(format!(
            "omega_i must be positive, got {omega_i}"
        )));
    }
    Ok((2.0 * alpha * c.hbar / (c.m * omega_i)).atan())
}

/// `sqrt(kappa(t_i) / m)` for a quantum protocol.
pub fn initial_omega(kappa_t: &TimeProtocol, c: &PhysConsts) -> Result<f64> {
    let k = kappa_t.values()[0];
    if !(k > 0.0) {
        return Err(Error::Domain(format!(
            "initial stiffness must be positive, got {k}"
        )));
    }
    Ok((k / c.m).sqrt())
}

/// Nelson drift velocity `(hbar / m)(2 alpha - 1 / (2 s)) x`.
pub fn nelson_drift(x: f64, s: f64, alpha: f64, c: &PhysConsts) -> f64 {
    c.hbar / c.m * (2.0 * alpha - 0.5 / s) * x
}
