#![allow(dead_code)]

use aeronet::nn::{ActivationKind, LossKind, NetworkSpec, OptimizerKind, Sample};
use aeronet::sim::Experiment;
use aeronet::topology::AssignmentDesign;

pub fn xor_dataset() -> Vec<Sample> {
    [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)]
        .into_iter()
        .map(|(x, t)| Sample::new(x.to_vec(), vec![t]))
        .collect()
}

pub fn xor_spec(epochs: usize) -> NetworkSpec {
    NetworkSpec {
        layer_sizes: vec![2, 2, 1],
        activations: vec![ActivationKind::Sigmoid, ActivationKind::Sigmoid],
        loss: LossKind::MeanSquaredError,
        epochs,
        optimizer: OptimizerKind::Sgd { learning_rate: 0.5 },
        seed: 42,
    }
}

/// 2-3-2 ReLU hidden layer with a softmax output.
pub fn relu_softmax_spec(epochs: usize, seed: u64) -> NetworkSpec {
    NetworkSpec {
        layer_sizes: vec![2, 3, 2],
        activations: vec![ActivationKind::Relu, ActivationKind::Softmax],
        loss: LossKind::CrossEntropy,
        epochs,
        optimizer: OptimizerKind::adam(0.05),
        seed,
    }
}

pub fn two_class_dataset() -> Vec<Sample> {
    [([-1.0, -0.5], 0), ([-0.8, 0.2], 0), ([0.9, 0.4], 1), ([0.7, -0.6], 1), ([-0.3, -0.9], 0), ([0.2, 0.8], 1)]
        .into_iter()
        .map(|(x, c)| {
            let mut t = vec![0.0, 0.0];
            t[c] = 1.0;
            Sample::new(x.to_vec(), t)
        })
        .collect()
}

pub fn designs() -> [AssignmentDesign; 3] {
    [
        AssignmentDesign::OneNeuronPerDevice,
        AssignmentDesign::LayerGrouped { neurons_per_device: 2 },
        AssignmentDesign::LayerGroupedWithController { neurons_per_device: 2 },
    ]
}

pub fn xor_experiment(epochs: usize, design: AssignmentDesign) -> Experiment {
    Experiment::new(xor_spec(epochs), design, xor_dataset())
}
