//! Monte-Carlo drivers.

mod empirical;
mod experiment;

pub use empirical::{
    empirical_concentration, empirical_load_distribution, empirical_noncollided, noncollided_bound,
    ConcentrationSetup, ConcentrationTable, LoadRow, LoadTable, NoncollidedEstimate, TailRow,
    MIN_TAIL_TRIALS,
};
pub use experiment::{
    draw_scenario, run_experiment, run_trial, sweep_supported_users, AggregateResult,
    ExperimentSpec, PointResult, Stat, SweepAxis, SweepRow, TrialOutcome,
};
