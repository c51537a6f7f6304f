//! Non-stationary bandits with knapsacks.
//!
//! Instances and their generators, fluid LP benchmarks with dual prices,
//! non-stationarity measures, bandit policies, and the virtual-queue method
//! for online convex optimization with constraints.

pub mod algorithms;
pub mod environments;
pub mod error;
pub mod instance;
pub mod lp;
pub mod measures;
pub mod ocowc;

pub use error::{Error, Result};
pub use instance::{BwkInstance, OutcomeModel, OutcomeSample, RoundGroups};
