//! Feed-forward network math shared by the centralized reference trainer
//! and the simulated neuron devices.
//!
//! All arithmetic is `f64`, and every dot product or gradient accumulation
//! runs in ascending neuron index order. The distributed simulation relies
//! on this to reproduce the reference trainer bit for bit.

mod activation;
mod loss;
mod network;
mod optimizer;
mod train;

use thiserror::Error;

pub use activation::{activate, activate_scalar, activation_derivative, ActivationKind};
pub use loss::{compute_loss, mean_loss, output_delta, LossKind};
pub use network::{
    backward_reference, forward_reference, init_parameters, weighted_sum, ActivationRecord, GradientSet,
    LayerActivation, LayerParams, NetworkSpec, ParameterSet,
};
pub use optimizer::{optimizer_step, AdamState, OptimizerKind};
pub use train::{train_from, train_reference, ReferenceRun, Sample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("activation {0:?} has no elementwise derivative")]
    UnsupportedActivation(ActivationKind),
    #[error("configuration error: {0}")]
    Config(String),
}
