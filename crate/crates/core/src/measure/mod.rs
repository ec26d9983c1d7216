//! Exact computations with the stationary measure.

mod band;
mod enumerate;
mod heat_bath;
mod kernel;
mod spectral;
mod table;

pub use band::{
    band_dp_conditional_marginal, band_dp_partition, band_dp_sample, BandDp, BandSampler, BandState, Column,
    Tables, MAX_WINDOW,
};
pub use enumerate::{enumerate_stationary, log_weight};
pub use heat_bath::{heat_bath_block_sample, HeatBath, HeatBathOptions};
pub use kernel::{adjacent_kernel, build_transition_matrix, TransitionMatrix, REVERSIBILITY_TOLERANCE};
pub use spectral::{
    exact_mixing_time, second_eigenvalue, spectral_gap, MixingCurve, DENSE_EIGEN_LIMIT, MIXING_STEP_CAP,
};
pub use table::{log_add, log_sum_exp, tv_aligned, tv_distance, DistributionTable};


pub const DEFAULT_ENUM_CAP: usize = 8;
pub const DEFAULT_WINDOW_CAP: usize = 22;
pub const DEFAULT_REGION_CAP: usize = 1_000_000;

/// Size limits for the exact engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Largest `n` for full enumeration (9 and 10 are accepted with a warning).
    pub enumeration: usize,
    /// Largest band width `1 + ℓ_max⁻ + ℓ_max⁺` for the transfer-matrix engine.
    pub window: usize,
    /// Largest number of distinct assignments a conditional marginal may have.
    pub region_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            enumeration: DEFAULT_ENUM_CAP,
            window: DEFAULT_WINDOW_CAP,
            region_states: DEFAULT_REGION_CAP,
        }
    }
}
