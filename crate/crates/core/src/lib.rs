//! Thermodynamic formalism and certified large-deviation measurements for
//! subshifts of finite type.
//!
//! The crate is organized around one pipeline:
//!
//! ```text
//! MarkovModel ──recode──▶ edge potentials ──▶ transfer matrices ──▶ pressure,
//!   equilibrium measures, rate functions ──▶ window measures of Birkhoff
//!   averages under shrinking windows, with certified lower/upper brackets.
//! ```
//!
//! * [`sft`] — transition-matrix models, word/cycle enumeration, higher-block
//!   recoding, extreme cycle means.
//! * [`potentials`] — locally constant potentials, Birkhoff sums, pressure
//!   normalization, lattice detection, regularity diagnostics.
//! * [`transfer`] — weighted and twisted transfer matrices, Perron data,
//!   spectral radii and sweeps.
//! * [`thermo`] — topological pressure, equilibrium (Gibbs) measures,
//!   pressure derivatives, entropy.
//! * [`ratefn`] — admissible mean intervals, tilt solving, rate functions.
//! * [`suspension`] — roof functions and flow observables with prescribed
//!   return-time integrals.
//! * [`deviations`] — exact and bracketed distributions of Birkhoff sums,
//!   shrinking-window schedules, smoothed functionals and their Fourier-side
//!   evaluation, sharp-prefactor diagnostics.
//!
//! All floating-point certificates in [`deviations`] are honest interval
//! brackets: outward-rounded arithmetic on masses, support enclosures for
//! accumulated sums, and conservative window queries.

pub mod cutoff;
pub mod deviations;
pub mod error;
pub mod interval;
pub mod potentials;
pub mod quad;
pub mod ratefn;
pub mod scalar;
pub mod sft;
pub mod suspension;
pub mod thermo;
pub mod transfer;

mod eigen;

pub use error::{Error, Result};
pub use interval::Iv;
pub use scalar::Scalar;
