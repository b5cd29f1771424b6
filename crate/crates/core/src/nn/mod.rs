//! Neural-network building blocks with hand-written gradients.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;
pub mod policy;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CriticKind};
pub use gaussian::{gaussian_entropy, gaussian_logprob, gaussian_logprob_grad};
pub use mlp::{Activation, ForwardCache, Mlp, MlpSpec};
pub use policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
