//! Time evolution: exponential integrators for long runs, the Picard
//! construction of the mild solution, and exact time derivatives.

mod etd;
mod ladder;
mod leibniz;
mod picard;
mod system;
mod trajectory;

pub use etd::{etd_evolve, geometric_times, EtdOptions, EtdScheme};
pub use ladder::{
    time_derivative_ladder, DEFAULT_LADDER_ORDER, LADDER_NOISE_FLOOR, LADDER_TAIL_THRESHOLD,
    MAX_LADDER_ORDER,
};
pub use leibniz::{leibniz_identity_check, LeibnizResidual, Polynomial};
pub use picard::{
    duhamel_apply, picard_solve, xt_distance, DuhamelQuadrature, PicardDiagnostics, PicardOptions,
    DEFAULT_THETA_GATE, NON_CONTRACTION_PATIENCE,
};
pub use system::MpksSystem;
pub use trajectory::{
    read_records, write_record, AbortReason, RunStatus, Scheme, Snapshot, StepDiagnostics,
    Trajectory, TrajectorySidecar,
};
