//! Scripted verifications producing series and pass/fail verdicts.

mod asep_tail;
mod block_check;
mod block_mixing;
mod burn_in;
mod disconnect;
mod lower_bound;
mod mixing;
mod pool;
mod regression;
mod result;
mod spatial;
mod tails;

pub use asep_tail::{asep_epsilon_prime, asep_tail_check, asep_tail_threshold};
pub use block_check::{block_decomposition_check, block_gaps, block_kernel, inner_edges, BlockGaps};
pub use block_mixing::{block_chain_mixing, block_inverse_gap, block_reversal, CoalescenceTarget};
pub use burn_in::{burn_in_profile, burn_in_scaling, displacement_samples, BurnInThresholds, StartState};
pub use disconnect::{disconnect_probability, disconnect_product_bound, valid_disconnect_range};
pub use lower_bound::{left_move_tail, lower_bound_experiment, LowerBoundSettings};
pub use mixing::{asep_coupling_scaling, mixing_exact, statistic_scaling, BiasFamily};
pub use pool::{default_jobs, par_map};
pub use regression::{regression_set, RegressionInstance, REGRESSION_EPSILONS, REGRESSION_SEED};
pub use result::{
    fingerprint, linear_fit, log_log_fit, mean_stderr, proportion, quantile, ExperimentResult, LinearFit, Series,
    SeriesPoint, Verdict, RESULT_SCHEMA,
};
pub use tails::{displacement_tails, localization_tail_check, CutLaws, MeasureMode};
pub use spatial::{extreme_left_boundaries, spatial_decay_curve, SpatialMode, SpatialTargets};
