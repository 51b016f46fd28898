//! Pseudo-spectral simulation of the two-dimensional Kuramoto–Sivashinsky
//! equation on the periodic torus `[−π, π)²`, in its scalar form
//!
//! ```text
//! φ_t + ½|∇φ|² + λΔφ + Δ²φ = 0
//! ```
//!
//! and its vector form `u_t + (u·∇)u + λΔu + Δ²u = 0`, together with the
//! diagnostics used to monitor regularity: `L^p` and Sobolev norms, shell
//! spectra, energy-estimate inner products, the Helmholtz–Leray drift of
//! vector solutions, and running time integrals for the family of
//! regularity criteria in [`criteria`].
//!
//! ```
//! use kse::{ModelConfig, simulate};
//!
//! let config = ModelConfig { n: 32, t_final: 0.01, h: 1e-3, ..ModelConfig::default() };
//! let outcome = simulate(&config, &mut []).unwrap();
//! assert!(outcome.status.is_completed());
//! ```

pub mod convergence;
pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod etd;
pub mod field;
pub mod harness;
pub mod helmholtz;
pub mod model;
pub mod snapshot;

pub use criteria::{criterion_check, CriterionSpec, TheoremId};
pub use diagnostics::{energy_record, lp_norm, sobolev_norm, wmp_norm, DiagnosticsRecord};
pub use error::{KseError, Result};
pub use field::{Direction, Grid, SpectralField, VectorField};
pub use helmholtz::{drift_quantities, leray_project, DriftQuantities, HodgeDecomposition};
pub use model::{
    simulate, simulate_from, unstable_mode_count, InitialData, ModelConfig, ModelFields, ModelKind, RunStatus,
    SimulationState,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    mod time_stepping {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/helmholtz.md")]
    mod helmholtz {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/criteria.md")]
    mod criteria {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
