//! Stackelberg strategic classification with two agent actions.
//!
//! Agents observe a firm's acceptance threshold and choose between
//! manipulation (`M`, raises the observed feature only), improvement
//! (`I`, raises the feature and makes the agent qualified) and doing
//! nothing (`N`). Feature gains are random. This crate computes the
//! agents' best-response partitions, the population statistics after
//! agents respond, optimal thresholds for firms that do or do not
//! anticipate the response, fairness-constrained threshold pairs, and a
//! Monte-Carlo simulator used as an independent check of all of these.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent_response;
pub mod distkit;
mod error;
pub mod fairness;
pub mod firm_policy;
pub mod mc_oracle;
pub mod optim;
pub mod post_strategic;

pub use agent_response::{Action, ActionProfile, EquilibriumType, IndifferenceFeatures, ResponsePartition};
pub use distkit::{Density1D, Grid, SupportInterval};
pub use error::{Error, Result};
pub use fairness::{Basis, Criterion, FairnessCriterion, RocPoint};
pub use firm_policy::{FirmParams, Mode, PolicyResult};
pub use post_strategic::{GroupModel, Label, PostStrategicStats};
