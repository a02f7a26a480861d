//! Concrete systems: the two scalar examples, the quadratic connectivity
//! game, the unicycle tracker, the Nash-seeking controller and their
//! composition, plus TOML configuration.

pub mod config;
mod examples;
mod game;
mod nes;
pub mod unicycle;

pub use examples::{
    build_example1, build_example2, example1_reduced_lyapunov, example1_sampler, example1_v1, example2_sampler,
    Example1Params, Example2Params, PerturbedSystem, LABELS,
};
pub use game::{eval_cost, pseudo_gradient, solve_nash_quadratic, GameParams, NashSolution, NASH_RESIDUAL_TOL};
pub use nes::{
    build_full_system, build_nes_controller, dither_frequencies, game_measurement, initial_controller_state,
    plant_offset, ControllerLayout, FullSystem, DEFAULT_FILTER_BOUND, Measurement, NESControllerParams, OSCILLATOR_TOL, TIMER_TOL,
};
pub use config::{build_scenario, sweep_scenario, BuiltScenario, ScenarioConfig, ScenarioKind};
pub use unicycle::{build_unicycle_agent, UnicycleParams};
