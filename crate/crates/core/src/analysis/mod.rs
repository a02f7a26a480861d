//! Lyapunov monitoring along arcs and empirical attractivity sweeps.

mod lyapunov;
mod sgpas;

pub use lyapunov::{
    bound_violations, check_flow_decrease, check_jump_decrease, lyapunov_along_arc, BoundViolation,
    DistanceMap, LyapunovSample, LyapunovSpec, RegionFn, StateFn, Violation, DEFAULT_FLOW_SLACK, JUMP_SLACK,
};
pub use sgpas::{
    entry_time, estimate_attractivity, estimate_attractivity_with, monotonicity_flags, trajectory_stats,
    AttractivityReport, AttractivityRow, IcSampler, MonotonicityFlag, ParamPoint, SGPASProbe, Scenario,
    TrajectoryStats, MONOTONICITY_SLACK,
};
