//! Shared domain types and elementary state formulas.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the `D = hbar / (2 m)` consistency check.
const CONSISTENCY_RTOL: f64 = 1e-12;

/// Physical constants: action, mass, drag coefficient and diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConsts {
    pub hbar: f64,
    pub m: f64,
    pub gamma: f64,
    pub d: f64,
}

impl PhysConsts {
    /// Arbitrary positive constants. No quantum consistency is imposed here;
    /// quantum-facing operations call [`PhysConsts::ensure_quantum`].
    pub fn new(hbar: f64, m: f64, gamma: f64, d: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("m", m), ("gamma", gamma), ("D", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { hbar, m, gamma, d })
    }

    /// Quantum-consistent constants with `D = hbar / (2 m)`.
    pub fn quantum(hbar: f64, m: f64, gamma: f64) -> Result<Self> {
        Self::new(hbar, m, gamma, hbar / (2.0 * m))
    }

    /// hbar = gamma = 1, m = 0.5, hence D = 1.
    pub fn natural_units() -> Self {
        Self {
            hbar: 1.0,
            m: 0.5,
            gamma: 1.0,
            d: 1.0,
        }
    }

    pub fn is_quantum(&self) -> bool {
        let expected = self.hbar / (2.0 * self.m);
        (self.d - expected).abs() <= CONSISTENCY_RTOL * expected
    }

    pub fn ensure_quantum(&self) -> Result<()> {
        if self.is_quantum() {
            Ok(())
        } else {
            Err(Error::InconsistentConstants {
                diffusion: self.d,
                expected: self.hbar / (2.0 * self.m),
            })
        }
    }

    /// `D * gamma`, the product that fixes the classical equilibrium `s * kbar`.
    pub fn dg(&self) -> f64 {
        self.d * self.gamma
    }
}

impl Default for PhysConsts {
    fn default() -> Self {
        Self::natural_units()
    }
}

/// Gaussian wavefunction parameters: variance, dynamical phase coefficient, geometric phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussianState {
    pub fn new(s: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("variance must be positive, got {s}")));
        }
        Ok(Self { s, alpha, beta })
    }

    /// Stationary state of variance `s`.
    pub fn stationary(s: f64) -> Result<Self> {
        Self::new(s, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Expansion,
    Compression,
}

impl Orientation {
    pub fn of(s_i: f64, s_f: f64) -> Self {
        if s_f > s_i {
            Orientation::Expansion
        } else {
            Orientation::Compression
        }
    }

    /// +1 for expansion, -1 for compression.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Expansion => 1.0,
            Orientation::Compression => -1.0,
        }
    }
}

/// Classical stiffness sampled on a strictly monotone variance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SGridProtocol {
    s_nodes: Vec<f64>,
    kbar: Vec<f64>,
    orientation: Orientation,
}

impl SGridProtocol {
    pub fn new(s_nodes: Vec<f64>, kbar: Vec<f64>) -> Result<Self> {
        if s_nodes.len() != kbar.len() {
            return Err(Error::Shape(format!(
                "s_nodes has {} entries but kbar has {}",
                s_nodes.len(),
                kbar.len()
            )));
        }
        if s_nodes.len() < 3 {
            return Err(Error::Shape(format!(
                "need at least 3 nodes, got {}",
                s_nodes.len()
            )));
        }
        if let Some(bad) = s_nodes.iter().chain(kbar.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample {bad}")));
        }
        if s_nodes[0] <= 0.0 || *s_nodes.last().unwrap() <= 0.0 {
            return Err(Error::Domain("variances must be positive".into()));
        }
        let orientation = Orientation::of(s_nodes[0], *s_nodes.last().unwrap());
        let sg = orientation.sign();
        for w in s_nodes.windows(2) {
            if !(sg * (w[1] - w[0]) > 0.0) {
                return Err(Error::Domain(format!(
                    "s_nodes not strictly monotone near {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            s_nodes,
            kbar,
            orientation,
        })
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }

    pub fn kbar(&self) -> &[f64] {
        &self.kbar
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn len(&self) -> usize {
        self.s_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_nodes.is_empty()
    }

    pub fn s_i(&self) -> f64 {
        self.s_nodes[0]
    }

    pub fn s_f(&self) -> f64 {
        self.s_nodes[self.s_nodes.len() - 1]
    }

    /// `u_j = D gamma - s_j kbar_j`, proportional to the variance rate.
    pub fn u(&self, c: &PhysConsts) -> Vec<f64> {
        self.s_nodes
            .iter()
            .zip(&self.kbar)
            .map(|(s, k)| c.dg() - s * k)
            .collect()
    }

    /// Checks that `D gamma - s kbar` carries the orientation sign at every interior node.
    pub fn check_feasible(&self, c: &PhysConsts) -> Result<()> {
        let sg = self.orientation.sign();
        let n = self.len();
        for j in 1..n - 1 {
            let u = c.dg() - self.s_nodes[j] * self.kbar[j];
            if !(sg * u > 0.0) {
                return Err(Error::Infeasible {
                    s: self.s_nodes[j],
                    reason: format!(
                        "D*gamma - s*kbar = {u:e} has the wrong sign for a {:?}",
                        self.orientation
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Quantum,
    Classical,
}

/// Stiffness schedule sampled on strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProtocol {
    t_nodes: Vec<f64>,
    values: Vec<f64>,
    kind: ProtocolKind,
}

impl TimeProtocol {
    pub fn new(t_nodes: Vec<f64>, values: Vec<f64>, kind: ProtocolKind) -> Result<Self> {
        if t_nodes.len() != values.len() {
            return Err(Error::Shape(format!(
                "t_nodes has {} entries but values has {}",
                t_nodes.len(),
                values.len()
            )));
        }
        if t_nodes.len() < 2 {
            return Err(Error::Shape(
                "a time protocol needs at least 2 nodes".into(),
            ));
        }
        if let Some(bad) = t_nodes.iter().chain(values.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample {bad}")));
        }
        if let Some(w) = t_nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "t_nodes not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self {
            t_nodes,
            values,
            kind,
        })
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_nodes.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.t_nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        self.t_nodes[self.t_nodes.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// Linear interpolation, clamped to the end values outside the support.
    pub fn value_at(&self, t: f64) -> f64 {
        crate::numerics::lerp(&self.t_nodes, &self.values, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Energy,
    Phase,
    Work,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Energy => "energy",
            CostKind::Phase => "phase",
            CostKind::Work => "work",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(CostKind::Energy),
            "phase" => Ok(CostKind::Phase),
            "work" => Ok(CostKind::Work),
            other => Err(Error::InvalidOption(format!("unknown cost kind '{other}'"))),
        }
    }
}

/// Cost choice, multipliers, boundary variances and grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub cost: CostKind,
    pub lambda: f64,
    pub mu: f64,
    pub s_i: f64,
    pub s_f: f64,
    pub n_grid: usize,
}

impl OptimizationProblem {
    pub fn new(
        cost: CostKind,
        lambda: f64,
        mu: f64,
        s_i: f64,
        s_f: f64,
        n_grid: usize,
    ) -> Result<Self> {
        if !(s_i.is_finite() && s_i > 0.0 && s_f.is_finite() && s_f > 0.0) {
            return Err(Error::Domain(format!(
                "boundary variances must be positive, got {s_i}, {s_f}"
            )));
        }
        if s_i == s_f {
            return Err(Error::Domain("s_i and s_f must differ".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Domain(format!("mu must be nonnegative, got {mu}")));
        }
        if n_grid < 3 {
            return Err(Error::Domain(format!(
                "n_grid must be at least 3, got {n_grid}"
            )));
        }
        Ok(Self {
            cost,
            lambda,
            mu,
            s_i,
            s_f,
            n_grid,
        })
    }

    pub fn orientation(&self) -> Orientation {
        Orientation::of(self.s_i, self.s_f)
    }
}

/// Checkpoint statistics of a particle ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    pub stderr_variance: Vec<f64>,
    pub n_particles: usize,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn positive(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("variance must be positive, got {s}")))
    }
}

/// Equilibrium classical stiffness `D gamma / s`.
pub fn equilibrium_kbar(s: f64, c: &PhysConsts) -> Result<f64> {
    positive(s)?;
    Ok(c.dg() / s)
}

/// Equilibrium quantum stiffness `m D^2 / s^2`.
pub fn equilibrium_kappa(s: f64, c: &PhysConsts) -> Result<f64> {
    positive(s)?;
    c.ensure_quantum()?;
    Ok(c.m * c.d * c.d / (s * s))
}

/// Dynamical phase coefficient `(m / 4 hbar) sdot / s`.
pub fn alpha_of(s: f64, sdot: f64, c: &PhysConsts) -> Result<f64> {
    positive(s)?;
    Ok(c.m / (4.0 * c.hbar) * sdot / s)
}

/// Position probability density of a Gaussian state.
pub fn density_at(x: f64, st: &GaussianState) -> f64 {
    (-x * x / (2.0 * st.s)).exp() / (2.0 * PI * st.s).sqrt()
}
