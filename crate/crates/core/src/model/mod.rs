//! Problem data model and exact regret evaluation.

mod grid;
mod mixture;
mod regret;
mod rule;
mod sample;
mod spec;

pub use grid::{Constraint, GridPoint, ParameterGrid};
pub use mixture::NatureMixture;
pub use regret::{
    expected_assignment, expected_assignment_under, max_regret_over_grid, regret, regret_from_assignment,
    regret_vs_mixture,
};
pub use rule::{MeanVector, TreatmentRule};
pub use sample::{SampleIndex, SampleSpace};
pub use spec::{Design, ProblemSpec};
