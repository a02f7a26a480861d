//! Hybrid systems and their solutions under flow/jump semantics.

mod arc;
mod export;
mod set;
mod solver;
mod system;

pub use arc::{distance_series, ArcBuilder, HybridArc, HybridTime, JumpView, Sample, Termination};
pub use export::{read_arc_csv, write_arc_csv, write_jumps_csv, CsvArc};
pub use set::{DistanceFn, MembershipFn, ProjectionFn, SetDescriptor, DEFAULT_SET_TOL};
pub use solver::{apply_jump, integrate_flow, solve, solve_partial, FlowOutcome, FlowStop, Priority, SolverConfig};
pub use system::{
    Block, FlowFn, Guard, GuardFn, HybridSystem, HybridSystemBuilder, JumpBlocks, JumpFn, JumpTag, Jumped,
};
