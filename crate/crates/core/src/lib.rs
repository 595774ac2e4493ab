//! Exact analysis toolkit for cooperative multi-agent actor-critic methods on finite Dec-POMDPs.

pub mod error;
pub mod model;

pub use error::{Error, Result};
pub use model::{DecPomdp, HistoryArena, IndividualHistory, JointHistory, JointSpace, Policy, PolicySet};
pub mod domains;
pub mod visitation;
pub mod values;
pub mod gradients;
pub mod actor_critic;
pub mod export;
pub mod suites;
