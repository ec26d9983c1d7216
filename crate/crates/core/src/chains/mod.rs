//! The stochastic processes and their couplings.
//!
//! Every process is a deterministic function of a stream of draws, so a
//! coupling is just several consumers of one stream.

mod asep;
mod at;
mod blocks;
mod checkpoint;
mod domination;
mod rng;
mod twin;

pub use asep::{
    asep_kernel, asep_rightmost_cdf, asep_rightmost_tail, asep_states, asep_stationary, asep_step,
    asep_step_in_place, coupled_asep_step, eta_projection, left_order_leq, AsepState, ASEP_ENUM_CAP,
};
pub use at::{at_step, at_step_in_place, restricted_at_step, restricted_at_step_in_place, StepOutcome};
pub use blocks::{block_step, BlockDraw, BlockDynamics, BlockKind, BlockSchedule, SelectionRule};
pub use checkpoint::{read_records, write_record, AuditViolation, CheckpointRecord};
pub use domination::{
    coupled_domination_step, default_tracked_ks, domination_holds, projected_family, q_is_dominated, reflected,
    DominationCoupling, TrackedAsep,
};
pub use rng::{derive_seed, stream_rng, DrawStream, UpdateDraw};
pub use twin::{asep_coalescence_run, twin_chain_coupling_run, AtChain, CouplingOutcome, Dynamics, RestrictedAtChain};
