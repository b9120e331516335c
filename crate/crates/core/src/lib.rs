//! Faster-than-adiabatic stiffness protocols for the quantum harmonic
//! oscillator, designed through an overdamped classical analog and checked
//! against exact Gaussian dynamics and Nelson ensembles.
//!
//! Typical flow: build an [`OptimizationProblem`], solve it with
//! [`solver::solve_bvp`], evaluate it with [`costs::j_total`], map it to the
//! time domain with [`analog::to_time_domain`] and verify the quantum
//! protocol with [`dynamics::integrate_ermakov`] and [`mc::simulate_nelson`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analog;
pub mod baselines;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod mc;
pub mod model;
pub mod numerics;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    alpha_of, density_at, equilibrium_kappa, equilibrium_kbar, CostKind, EnsembleStats,
    GaussianState, OptimizationProblem, Orientation, PhysConsts, ProtocolKind, SGridProtocol,
    TimeProtocol,
};
