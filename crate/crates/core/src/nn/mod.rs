//! Dense numerics for the neural agents: layers with hand-written
//! backward passes, masked softmax, Adam and the clipped PPO update.
//!
//! Activations are batch-major `[rows, width]` tensors. Every module keeps
//! its parameters in [`Tensor`]s and exposes them through [`Parameters`] so
//! gradients and optimizer moments can reuse the same structure.

mod adam;
mod layers;
mod ppo;
mod softmax;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use layers::{LayerNorm, LayerNormCache, Linear, MlpBlock, MlpCache, LAYER_NORM_EPS};
pub use ppo::{clipped_objective, ppo_update, ActorCritic, EpochLoss, Evaluation, PpoConfig, Transition};
pub use softmax::{entropy, masked_log_softmax, masked_softmax, masked_softmax_sample};
pub use tensor::{Parameters, Tensor};
