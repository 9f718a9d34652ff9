//! Multiply robust estimation of target-population counterfactual means.
//!
//! A randomized trial (`s = 1`) is combined with a sample from a target
//! population (`s = 0`) under the assumption that the *conditional relative
//! effect* `E[Y¹|X]/E[Y⁰|X]` is shared by both populations. The crate
//! estimates
//!
//! * `alpha = E[Y¹ | S = 0]`,
//! * `beta  = E[Y⁰ | S = 0]`,
//! * `phi   = alpha / beta` and `psi = alpha - beta`,
//!
//! by solving influence-function based estimating equations with
//! cross-fitted nuisance functions, and reports Wald intervals from the
//! empirical variance of the influence functions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and the parallel experiment runner live in the companion
//! `transport` crate.

#![no_std]

extern crate alloc;

pub mod crossfit;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod math;
pub mod nuisance;
pub mod sim;

pub use crate::crossfit::{crossfit_predictions, make_folds, predict_in_sample, FoldScheme, NuisancePredictions};
pub use crate::data::{Dataset, Observation, Scenario, ScenarioFlags, ValidationReport};
pub use crate::error::{Error, Result};
pub use crate::estimators::{IfVectors, Method, TargetEstimates};
pub use crate::inference::{wald_inference, EstimateRecord};
pub use crate::nuisance::{NuisanceBundle, NuisanceSpec};
