//! Measuring cultural assimilation from marginal audience counts.
//!
//! [`catalog`] defines interests, demographic axes and population specs;
//! [`audience`] turns specs into count queries against a backend;
//! [`simulator`] provides a planted-ground-truth backend; [`metrics`] and
//! [`stats`] compute interest ratios, assimilation ratios and the tests and
//! regressions on top of them.

pub mod audience;
pub mod catalog;
pub mod error;
pub mod metrics;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
