use serde::{Deserialize, Serialize};

use super::loss::{compute_loss, mean_loss};
use super::network::{backward_reference, forward_reference, init_parameters, NetworkSpec, ParameterSet};
use super::optimizer::optimizer_step;
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRun {
    pub params: ParameterSet,
    pub epoch_losses: Vec<f64>,
}

/// Centralized online trainer: forward, loss, backward and one optimizer
/// step per sample, visiting samples in dataset order.
pub fn train_reference(spec: &NetworkSpec, dataset: &[Sample]) -> Result<ReferenceRun, NnError> {
    train_from(spec, init_parameters(spec), dataset)
}

/// Same as [`train_reference`] but starting from explicit parameters.
pub fn train_from(spec: &NetworkSpec, initial: ParameterSet, dataset: &[Sample]) -> Result<ReferenceRun, NnError> {
    let mut params = initial;
    params.check_shape(spec)?;
    let mut adam = spec.optimizer.init_state(&params);
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        let mut losses = Vec::with_capacity(dataset.len());
        for sample in dataset {
            let record = forward_reference(spec, &params, &sample.input)?;
            losses.push(compute_loss(spec.loss, record.output(), &sample.target)?);
            let grads = backward_reference(spec, &params, &record, &sample.target)?;
            params = optimizer_step(&spec.optimizer, adam.as_mut(), &params, &grads)?;
        }
        epoch_losses.push(mean_loss(&losses));
    }
    Ok(ReferenceRun { params, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ActivationKind, LayerParams, LossKind, OptimizerKind};

    fn scalar_spec(epochs: usize, lr: f64) -> NetworkSpec {
        NetworkSpec {
            layer_sizes: vec![1, 1],
            activations: vec![ActivationKind::Identity],
            loss: LossKind::MeanSquaredError,
            epochs,
            optimizer: OptimizerKind::Sgd { learning_rate: lr },
            seed: 3,
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let spec = scalar_spec(0, 0.1);
        let run = train_reference(&spec, &[Sample::new(vec![1.0], vec![2.0])]).unwrap();
        assert_eq!(run.params, init_parameters(&spec));
        assert!(run.epoch_losses.is_empty());
    }

    #[test]
    fn scalar_descent_is_monotone() {
        let spec = scalar_spec(200, 0.05);
        let run = train_reference(&spec, &[Sample::new(vec![1.5], vec![-0.7])]).unwrap();
        for pair in run.epoch_losses.windows(2) {
            assert!(pair[1] <= pair[0], "{pair:?}");
        }
        assert!(run.epoch_losses.last().unwrap() < &1e-6);
    }

    #[test]
    fn explicit_start_matches_hand_step() {
        let spec = scalar_spec(1, 0.1);
        let start = ParameterSet { layers: vec![LayerParams { weights: vec![vec![0.5]], biases: vec![0.0] }] };
        let run = train_from(&spec, start, &[Sample::new(vec![2.0], vec![0.0])]).unwrap();
        // z = 1, loss = 1, dW = 2·1·2 = 4, db = 2
        assert_eq!(run.epoch_losses, vec![1.0]);
        assert_eq!(run.params.layers[0].weights[0][0], 0.5 - 0.1 * 4.0);
        assert_eq!(run.params.layers[0].biases[0], -0.2);
    }

    #[test]
    fn shape_errors_propagate() {
        let spec = scalar_spec(1, 0.1);
        let r = train_reference(&spec, &[Sample::new(vec![1.0, 2.0], vec![0.0])]);
        assert!(matches!(r, Err(NnError::Shape(_))));
    }
}
