//! Simulation and analysis toolkit for haptically coupled dyadic decisions.
//!
//! The crate covers the whole pipeline: cumulative-Gaussian psychometric
//! curves and their least-squares fitting, closed-form dyad predictions
//! (weighted confidence sharing and its alternatives), a balanced two-interval
//! trial design, confidence-driven agents negotiating through two virtually
//! coupled one-DOF handles, trajectory analytics and the statistical tests
//! used to compare simulated cohorts.

pub mod agents;
pub mod analytics;
pub mod coupling_sim;
pub mod error;
pub mod group_models;
pub mod harness;
pub mod psychometrics;
pub mod simplex;
pub mod special;
pub mod stats;
pub mod trials;

pub use agents::{AgentProfile, FollowerStyle, Negotiator, Percept, YieldMode};
pub use analytics::{Member, MemberOutcome, Predictor, TrialRecord};
pub use coupling_sim::{CouplingConfig, GroupOutcome, LogSample, TrajectoryLog};
pub use error::{Error, Result};
pub use group_models::{DyadModel, DyadPrediction};
pub use psychometrics::{FitResult, PsychCurve, ResponseTable, CANONICAL_LEVELS};
pub use stats::{RegressionResult, TTestResult, TestFlavor};
pub use trials::{Choice, TrialSpec};
