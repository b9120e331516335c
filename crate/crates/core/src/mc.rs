//! Ensemble simulation of the classical Langevin and Nelson processes.
//!
//! Particle `k` draws from a ChaCha stream keyed by `(seed, k)`, particles are
//! processed in fixed-size chunks and chunk sums are combined in chunk order,
//! so the statistics do not depend on how many worker threads run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::model::{EnsembleStats, PhysConsts, TimeProtocol};
use crate::numerics::lerp;

const CHUNK: usize = 1024;
/// Pass threshold on every z-score.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
    /// Sample times, non-decreasing, inside the protocol support.
    pub checkpoints: Vec<f64>,
}

impl McConfig {
    pub fn new(n_particles: usize, dt: f64, seed: u64, checkpoints: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            n_particles,
            dt,
            seed,
            checkpoints,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 100 {
            return Err(Error::InvalidOption(format!(
                "need at least 100 particles, got {}",
                self.n_particles
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidOption(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidOption("no checkpoints".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidOption(
                "checkpoints must be non-decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// `n` checkpoints evenly spread over `(t0, t1]`.
pub fn even_checkpoints(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k == n {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / n as f64
            }
        })
        .collect()
}

/// Step size `min(gamma / |kbar|_max / 10, duration / 2000)`.
pub fn default_dt(kbar_max: f64, gamma: f64, duration: f64) -> f64 {
    let stab = if kbar_max > 0.0 {
        gamma / kbar_max / 10.0
    } else {
        f64::INFINITY
    };
    stab.min(duration / 2000.0)
}

/// Linear SDE `dx = a_k x dt + sqrt(2 D dt) N(0,1)` with per-step coefficients `a_k`.
struct LinearSde<'a> {
    drift: &'a [f64],
    h: f64,
    noise: f64,
    s_start: f64,
    t0: f64,
    /// Step index of every checkpoint.
    marks: Vec<usize>,
}

fn checkpoint_steps(cfg: &McConfig, t0: f64, h: f64, n_steps: usize) -> Result<Vec<usize>> {
    cfg.checkpoints
        .iter()
        .map(|&t| {
            let k = ((t - t0) / h).round();
            if k < 0.0 || k > n_steps as f64 {
                Err(Error::Domain(format!(
                    "checkpoint {t} outside the protocol support"
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn run(sde: &LinearSde, cfg: &McConfig) -> EnsembleStats {
    let n_cp = sde.marks.len();
    let n = cfg.n_particles;
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<[f64; 4]>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = vec![[0.0; 4]; n_cp];
            let sd0 = sde.s_start.sqrt();
            for p in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(p as u64);
                let z0: f64 = StandardNormal.sample(&mut rng);
                let mut x = sd0 * z0;
                let mut step = 0usize;
                for (slot, &mark) in sde.marks.iter().enumerate() {
                    while step < mark {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x += sde.drift[step] * x * sde.h + sde.noise * z;
                        step += 1;
                    }
                    let x2 = x * x;
                    let a = &mut acc[slot];
                    a[0] += x;
                    a[1] += x2;
                    a[2] += x2 * x;
                    a[3] += x2 * x2;
                }
            }
            acc
        })
        .collect();

    let mut sums = vec![[0.0; 4]; n_cp];
    for chunk in &partial {
        for (s, c) in sums.iter_mut().zip(chunk) {
            for q in 0..4 {
                s[q] += c[q];
            }
        }
    }
    let nf = n as f64;
    let mut st = EnsembleStats {
        times: sde
            .marks
            .iter()
            .map(|&k| sde.t0 + k as f64 * sde.h)
            .collect(),
        mean: Vec::with_capacity(n_cp),
        variance: Vec::with_capacity(n_cp),
        excess_kurtosis: Vec::with_capacity(n_cp),
        stderr_variance: Vec::with_capacity(n_cp),
        n_particles: n,
    };
    for s in &sums {
        let mean = s[0] / nf;
        let (r2, r3, r4) = (s[1] / nf, s[2] / nf, s[3] / nf);
        let m2 = r2 - mean * mean;
        let m4 = r4 - 4.0 * mean * r3 + 6.0 * mean * mean * r2 - 3.0 * mean.powi(4);
        let var = m2 * nf / (nf - 1.0);
        st.mean.push(mean);
        st.variance.push(var);
        st.excess_kurtosis.push(m4 / (m2 * m2) - 3.0);
        st.stderr_variance.push(var * (2.0 / (nf - 1.0)).sqrt());
    }
    st
}

fn grid(t0: f64, t1: f64, dt: f64) -> (usize, f64) {
    let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    (n, (t1 - t0) / n as f64)
}

/// Euler-Maruyama ensemble of `dx = -(kbar / gamma) x dt + sqrt(2 D) dW`.
pub fn simulate_classical(
    kbar_t: &TimeProtocol,
    s_start: f64,
    cfg: &McConfig,
    c: &PhysConsts,
) -> Result<EnsembleStats> {
    cfg.validate()?;
    if !(s_start > 0.0) {
        return Err(Error::Domain(format!(
            "initial variance must be positive, got {s_start}"
        )));
    }
    let kmax = kbar_t.max_abs();
    if kmax > 0.0 && cfg.dt >= c.gamma / kmax {
        return Err(Error::InvalidOption(format!(
            "dt = {} violates the stability bound gamma/|kbar|max = {}",
            cfg.dt,
            c.gamma / kmax
        )));
    }
    let t0 = kbar_t.t_start();
    let (n_steps, h) = grid(t0, kbar_t.t_end(), cfg.dt);
    let drift: Vec<f64> = (0..n_steps)
        .map(|k| -kbar_t.value_at(t0 + k as f64 * h) / c.gamma)
        .collect();
    let sde = LinearSde {
        drift: &drift,
        h,
        noise: (2.0 * c.d * h).sqrt(),
        s_start,
        t0,
        marks: checkpoint_steps(cfg, t0, h, n_steps)?,
    };
    Ok(run(&sde, cfg))
}

/// Euler-Maruyama ensemble of the Nelson process with drift taken from an Ermakov run.
pub fn simulate_nelson(
    traj: &TrajectoryRecord,
    cfg: &McConfig,
    c: &PhysConsts,
) -> Result<EnsembleStats> {
    cfg.validate()?;
    c.ensure_quantum()?;
    if traj.len() < 2 {
        return Err(Error::Shape("trajectory needs at least 2 samples".into()));
    }
    let t0 = traj.t[0];
    let (n_steps, h) = grid(t0, traj.t[traj.len() - 1], cfg.dt);
    let coef = |t: f64| {
        c.hbar / c.m * (2.0 * lerp(&traj.t, &traj.alpha, t) - 0.5 / lerp(&traj.t, &traj.s, t))
    };
    let drift: Vec<f64> = (0..n_steps).map(|k| coef(t0 + k as f64 * h)).collect();
    let amax = drift.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if amax * h >= 1.0 {
        return Err(Error::InvalidOption(format!(
            "dt = {h} too large for drift rate {amax}"
        )));
    }
    let sde = LinearSde {
        drift: &drift,
        h,
        noise: (2.0 * c.d * h).sqrt(),
        s_start: traj.s[0],
        t0,
        marks: checkpoint_steps(cfg, t0, h, n_steps)?,
    };
    Ok(run(&sde, cfg))
}

/// Per-checkpoint Gaussianity check against a reference variance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornReport {
    pub pass: bool,
    pub z_variance: Vec<f64>,
    pub z_kurtosis: Vec<f64>,
    pub worst_z: f64,
}

/// Variance z-scores `(v - s_ref) / (s_ref sqrt(2/(N-1)))` and kurtosis
/// z-scores `k / sqrt(24/N)`; passes iff every `|z| <= 3`.
pub fn verify_born(stats: &EnsembleStats, reference_s: &[f64]) -> Result<BornReport> {
    if reference_s.len() != stats.len() {
        return Err(Error::Shape(format!(
            "{} reference variances for {} checkpoints",
            reference_s.len(),
            stats.len()
        )));
    }
    let nf = stats.n_particles as f64;
    let z_variance: Vec<f64> = stats
        .variance
        .iter()
        .zip(reference_s)
        .map(|(v, r)| (v - r) / (r * (2.0 / (nf - 1.0)).sqrt()))
        .collect();
    let z_kurtosis: Vec<f64> = stats
        .excess_kurtosis
        .iter()
        .map(|k| k / (24.0 / nf).sqrt())
        .collect();
    let worst_z = z_variance
        .iter()
        .chain(&z_kurtosis)
        .fold(0.0_f64, |a, z| a.max(z.abs()));
    Ok(BornReport {
        pass: worst_z <= Z_LIMIT && worst_z.is_finite(),
        z_variance,
        z_kurtosis,
        worst_z,
    })
}

/// Joint z-scores between the variance curves of two ensembles.
pub fn twin_z(a: &EnsembleStats, b: &EnsembleStats) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(
            "ensembles have different checkpoint counts".into(),
        ));
    }
    Ok((0..a.len())
        .map(|k| (a.variance[k] - b.variance[k]) / a.stderr_variance[k].hypot(b.stderr_variance[k]))
        .collect())
}
