//! Two-timescale structure: boundary-layer and reduced systems, manifold
//! distances and jump regularity.

mod decomposition;
mod derive;
mod manifold;
mod regularity;

pub use decomposition::{steady_state_residual, SteadyStateFn, SteadyStateMap, TimescaleDecomposition};
pub use derive::{make_boundary_layer, make_reduced, LayerVariant};
pub use manifold::{default_rho, manifold_distance, ManifoldKind, ManifoldSet, REFINEMENT_TOL};
pub use regularity::{
    classify_jumps, JumpLabel, JumpRegularityReport, LabeledJump, RegularityVariant, REGULARITY_SLACK,
};
