//! Health-informed counterfactual credit assignment for multi-agent PPO.
//!
//! The crate is organised bottom-up:
//!
//! - [`health`]: Dec-POMDP value types with first-class per-agent health,
//!   action/observation constriction and the health-property validator.
//! - [`envs`]: particle-world scenarios (hazardous navigation, hazardous
//!   communication network, hazard-free cooperative navigation) and a small
//!   tabular Dec-POMDP used for exact verification.
//! - [`nn`]: fixed-architecture MLPs with hand-written backward passes, the
//!   diagonal-Gaussian policy head, Adam and the checkpoint format.
//! - [`algo`]: GAE, value targets, the three credit variants, the clipped
//!   surrogate and the training iteration.
//! - [`oracle`]: exact trajectory enumeration checks of the baseline and
//!   estimator identities.
//! - [`harness`]: experiment configuration, seeded multi-trial runs, learning
//!   curves and CSV output.

pub mod algo;
pub mod envs;
pub mod error;
pub mod harness;
pub mod health;
pub mod nn;
pub mod oracle;
pub mod rng;

pub use algo::{TrainConfig, Trainer, Variant};
pub use envs::{Environment, Scenario};
pub use error::{Error, Result};
pub use health::{HealthVector, JointAction, JointObservation, JointState};
