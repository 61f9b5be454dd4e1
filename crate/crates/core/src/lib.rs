//! Minimax-regret treatment rules by fictitious play.
//!
//! A policymaker picks a rule mapping binomial samples to treatment
//! probabilities; nature picks Bernoulli means from a finite grid. Fictitious
//! play alternates best responses and brackets the game's value between the
//! best lower bound seen (the Bayes risk against nature's running mixture) and
//! the best upper bound seen (the worst-case regret of the running rule).

pub mod best_response;
pub mod coarsening;
pub mod engine;
mod error;
pub mod eval;
pub mod harness;
pub mod innovations;
pub mod io;
pub mod model;
pub mod oracles;
pub mod prob;
pub mod symmetric;
mod tensor;

pub use best_response::{lower_bound_value, nature_best_response, policymaker_best_response, BayesScores, TiePolicy};
pub use engine::{solve, weight, SolveConfig, SolveReport, StopReason, TraceRow, WeightSchedule};
pub use error::{Error, Result};
pub use eval::{GridEvaluator, ScanRegion};
pub use innovations::{check_perm_symmetry, es_rule_innovations, solve_innovations};
pub use model::{
    expected_assignment, max_regret_over_grid, regret, regret_vs_mixture, Constraint, Design, GridPoint, MeanVector,
    NatureMixture, ParameterGrid, ProblemSpec, SampleIndex, SampleSpace, TreatmentRule,
};
pub use oracles::{balanced_minimax_rule, lookup_reference, n1_zero_rule};
pub use symmetric::{check_symmetry, es_rule, so_rule, solve_symmetric, EsVariant};
