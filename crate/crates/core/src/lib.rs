//! Simulation and exact-verification toolkit for the biased adjacent-transposition
//! shuffle on permutations.
//!
//! The crate is split into four layers:
//!
//! * [`perm`]: permutations, bias matrices, localization windows, and the
//!   relabeling of a permutation restricted to an interval.
//! * [`measure`]: exact computations with the stationary measure. Enumeration,
//!   transition kernels and spectral gaps for small `n`, plus a band-limited
//!   transfer-matrix engine for localized instances with `n` in the hundreds.
//! * [`chains`]: the stochastic processes (adjacent-transposition steps, block
//!   dynamics, exclusion processes) and the couplings between them.
//! * [`experiments`]: scripted verifications that turn the above into series and
//!   pass/fail verdicts.
//!
//! Positions and particle labels are 1-based in every public signature.

pub mod chains;
pub mod error;
pub mod experiments;
pub mod measure;
pub mod perm;

pub use error::{Error, Result};
pub use perm::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};
