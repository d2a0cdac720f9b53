//! Monte Carlo estimation of how strongly, and how typically, multiqubit
//! pure states violate local realism under random measurements.
//!
//! The pipeline for one trial is: pick a state ([`state`]), draw random
//! dichotomic observables ([`measurement`]), compute the joint outcome
//! statistics ([`behavior`]), and solve a linear program for the critical
//! white-noise visibility ([`visibility`]). The nonlocality strength is
//! `1 - v_crit`. The [`experiment`] module repeats this over many trials, and
//! [`inequality`] relates violations to explicit Bell inequalities.

pub mod behavior;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod inequality;
pub mod measurement;
pub mod revised;
pub mod simplex;
pub mod state;
pub mod visibility;

pub use behavior::{
    compute_behavior, expectation_values, restrict_behavior, Behavior, CorrelationTable,
};
pub use error::{Error, Result};
pub use measurement::{sample_random_observable, MeasurementSetup, Observable};
pub use state::{make_named_state, sample_random_pure_state, NamedState, StateVector};
pub use visibility::{
    build_visibility_lp, critical_visibility, solve_lp, Certificate, DeterministicStrategy,
    LpModel, LpSolution, VisibilityResult,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/behaviors.md")]
    mod behaviors {}
    #[doc = include_str!("../../../book/src/visibility.md")]
    mod visibility {}
    #[doc = include_str!("../../../book/src/inequalities.md")]
    mod inequalities {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
