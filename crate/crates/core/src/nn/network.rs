use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{activate, activation_derivative, ActivationKind};
use super::loss::{output_delta, LossKind};
use super::optimizer::OptimizerKind;
use super::NnError;

/// Architecture and training configuration of a feed-forward network.
///
/// Layer 0 is the input layer; `activations[l - 1]` belongs to layer `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<ActivationKind>,
    pub loss: LossKind,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl NetworkSpec {
    /// Number of layers including the input layer.
    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec has layers")
    }

    pub fn output_layer(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Activation of layer `layer` (must be ≥ 1).
    pub fn activation(&self, layer: usize) -> ActivationKind {
        self.activations[layer - 1]
    }

    pub fn output_activation(&self) -> ActivationKind {
        *self.activations.last().expect("validated spec has activations")
    }

    /// Total neuron count over the non-input layers.
    pub fn trainable_neurons(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }

    /// Every violated invariant, reported together.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.layer_sizes.len() < 2 {
            errors.push("at least 2 layers".to_string());
        }
        if self.layer_sizes.contains(&0) {
            errors.push("every layer needs at least one neuron".to_string());
        }
        if self.activations.len() + 1 != self.layer_sizes.len() {
            errors.push(format!(
                "expected {} activations (one per non-input layer), got {}",
                self.layer_sizes.len().saturating_sub(1),
                self.activations.len()
            ));
        }
        if let Some((_, hidden)) = self.activations.split_last() {
            if hidden.contains(&ActivationKind::Softmax) {
                errors.push("softmax is only allowed on the output layer".to_string());
            }
        }
        if errors.is_empty() {
            let act = self.output_activation();
            if !self.loss.supports(act, self.output_size()) {
                errors.push(format!(
                    "loss {:?} is incompatible with a {} output layer of {} neurons",
                    self.loss,
                    act.name(),
                    self.output_size()
                ));
            }
        }
        errors.extend(self.optimizer.validate());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Weights and biases of one non-input layer: `weights[i][j]` connects
/// neuron `j` of the previous layer to neuron `i` of this layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LayerParams { weights: vec![vec![0.0; cols]; rows], biases: vec![0.0; rows] }
    }

    fn same_shape(&self, other: &LayerParams) -> bool {
        self.biases.len() == other.biases.len()
            && self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.len() == b.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub layers: Vec<LayerParams>,
}

/// Loss gradients with the same shape as a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub layers: Vec<LayerParams>,
}

impl ParameterSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec.layer_sizes.windows(2).map(|w| LayerParams::zeros(w[1], w[0])).collect();
        ParameterSet { layers }
    }

    /// Parameters of layer `layer` (must be ≥ 1).
    pub fn layer(&self, layer: usize) -> &LayerParams {
        &self.layers[layer - 1]
    }

    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<(), NnError> {
        let expected = ParameterSet::zeros(spec);
        if self.layers.len() != expected.layers.len()
            || !self.layers.iter().zip(&expected.layers).all(|(a, b)| a.same_shape(b))
        {
            return Err(NnError::Shape("parameter set does not match network spec".into()));
        }
        Ok(())
    }

    pub(crate) fn same_shape_as(&self, layers: &[LayerParams]) -> bool {
        self.layers.len() == layers.len() && self.layers.iter().zip(layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.biases.iter().all(|b| b.is_finite()) && l.weights.iter().flatten().all(|w| w.is_finite())
        })
    }
}

impl GradientSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        GradientSet { layers: ParameterSet::zeros(spec).layers }
    }
}

/// `bias + Σ weights[j]·inputs[j]`, accumulated in ascending `j` starting
/// from the bias.
pub fn weighted_sum(weights: &[f64], inputs: &[f64], bias: f64) -> Result<f64, NnError> {
    if weights.len() != inputs.len() {
        return Err(NnError::Shape(format!(
            "weighted sum over {} weights and {} inputs",
            weights.len(),
            inputs.len()
        )));
    }
    let mut acc = bias;
    for (w, x) in weights.iter().zip(inputs) {
        acc += w * x;
    }
    if !acc.is_finite() {
        return Err(NnError::Numeric("weighted sum".into()));
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivation {
    pub z: Vec<f64>,
    pub a: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub input: Vec<f64>,
    /// One entry per non-input layer.
    pub layers: Vec<LayerActivation>,
}

impl ActivationRecord {
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("record has at least one layer").a
    }

    /// Activations feeding layer `layer` (≥ 1).
    fn inputs_of(&self, layer: usize) -> &[f64] {
        if layer == 1 {
            &self.input
        } else {
            &self.layers[layer - 2].a
        }
    }
}

pub fn forward_reference(spec: &NetworkSpec, params: &ParameterSet, input: &[f64]) -> Result<ActivationRecord, NnError> {
    if input.len() != spec.input_size() {
        return Err(NnError::Shape(format!("input has {} features, expected {}", input.len(), spec.input_size())));
    }
    params.check_shape(spec)?;
    let mut record = ActivationRecord { input: input.to_vec(), layers: Vec::with_capacity(params.layers.len()) };
    for layer in 1..spec.layer_count() {
        let p = params.layer(layer);
        let prev = record.inputs_of(layer);
        let z = p
            .weights
            .iter()
            .zip(&p.biases)
            .map(|(row, &b)| weighted_sum(row, prev, b))
            .collect::<Result<Vec<_>, _>>()?;
        let a = activate(spec.activation(layer), &z)?;
        record.layers.push(LayerActivation { z, a });
    }
    Ok(record)
}

pub fn backward_reference(
    spec: &NetworkSpec,
    params: &ParameterSet,
    record: &ActivationRecord,
    target: &[f64],
) -> Result<GradientSet, NnError> {
    params.check_shape(spec)?;
    if record.layers.len() != params.layers.len() {
        return Err(NnError::Shape("activation record does not match network".into()));
    }
    let last = spec.output_layer();
    let out = &record.layers[last - 1];
    let mut delta = output_delta(spec.loss, spec.output_activation(), &out.a, &out.z, target)?;
    let mut grads = GradientSet::zeros(spec);
    for layer in (1..=last).rev() {
        let prev = record.inputs_of(layer);
        let g = &mut grads.layers[layer - 1];
        for (i, &d) in delta.iter().enumerate() {
            for (k, &x) in prev.iter().enumerate() {
                g.weights[i][k] = d * x;
            }
            g.biases[i] = d;
        }
        if layer > 1 {
            let below = &record.layers[layer - 2];
            let w = &params.layer(layer).weights;
            let derivative = activation_derivative(spec.activation(layer - 1), &below.z, &below.a)?;
            delta = (0..below.z.len())
                .map(|i| {
                    let mut acc = 0.0;
                    for (j, d) in delta.iter().enumerate() {
                        acc += w[j][i] * d;
                    }
                    acc * derivative[i]
                })
                .collect();
        }
    }
    Ok(grads)
}

/// Maps one PRNG draw to `[-range, range)` using its top 53 bits.
fn uniform_symmetric(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    -range + 2.0 * range * unit
}

/// Glorot-uniform weights with zero biases.
///
/// Draws come from ChaCha8 seeded with `spec.seed` via `seed_from_u64`,
/// layer by layer, row by row, column by column.
pub fn init_parameters(spec: &NetworkSpec) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layers = spec
        .layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let range = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| uniform_symmetric(&mut rng, range)).collect())
                .collect();
            LayerParams { weights, biases: vec![0.0; fan_out] }
        })
        .collect();
    ParameterSet { layers }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(layers: &[usize], acts: &[ActivationKind], loss: LossKind) -> NetworkSpec {
        NetworkSpec {
            layer_sizes: layers.to_vec(),
            activations: acts.to_vec(),
            loss,
            epochs: 1,
            optimizer: OptimizerKind::Sgd { learning_rate: 0.1 },
            seed: 7,
        }
    }

    #[test]
    fn weighted_sum_examples() {
        assert_eq!(weighted_sum(&[0.5, -1.0], &[0.0, 0.0], 0.3).unwrap(), 0.3);
        assert_eq!(weighted_sum(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 0.0).unwrap(), 6.0);
    }

    #[test]
    fn weighted_sum_matches_multiply_add_loop() {
        let w = [0.2, -0.4, 0.1];
        let x = [1.5, 2.0, -1.0];
        let b = 0.05;
        let mut oracle = b;
        for i in 0..3 {
            oracle += w[i] * x[i];
        }
        let got = weighted_sum(&w, &x, b).unwrap();
        assert_eq!(got, oracle);
        assert!((got - -0.55).abs() < 1e-12);
    }

    #[test]
    fn weighted_sum_errors() {
        assert!(matches!(weighted_sum(&[1.0], &[1.0, 2.0], 0.0), Err(NnError::Shape(_))));
        assert!(matches!(weighted_sum(&[f64::MAX], &[f64::MAX], 0.0), Err(NnError::Numeric(_))));
    }

    #[test]
    fn validation_collects_errors() {
        let mut s = spec(&[2], &[], LossKind::MeanSquaredError);
        assert!(s.validate().unwrap_err().contains(&"at least 2 layers".to_string()));
        s = spec(&[2, 3, 2], &[ActivationKind::Softmax, ActivationKind::Softmax], LossKind::CrossEntropy);
        assert!(s.validate().unwrap_err().iter().any(|e| e.contains("softmax")));
        s = spec(&[2, 2], &[ActivationKind::Softmax], LossKind::MeanSquaredError);
        assert!(s.validate().is_err());
        s = spec(&[2, 3, 2], &[ActivationKind::Relu, ActivationKind::Softmax], LossKind::CrossEntropy);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn zero_network_gives_half_sigmoid() {
        let s = spec(&[3, 4, 2, 1], &[ActivationKind::Sigmoid; 3], LossKind::MeanSquaredError);
        let p = ParameterSet::zeros(&s);
        let rec = forward_reference(&s, &p, &[1.0, -2.0, 5.0]).unwrap();
        for layer in &rec.layers {
            assert!(layer.a.iter().all(|&a| a == 0.5));
        }
    }

    #[test]
    fn single_identity_layer() {
        let s = spec(&[2, 1], &[ActivationKind::Identity], LossKind::MeanSquaredError);
        let p = ParameterSet { layers: vec![LayerParams { weights: vec![vec![1.0, 1.0]], biases: vec![0.0] }] };
        let rec = forward_reference(&s, &p, &[3.0, 4.0]).unwrap();
        assert_eq!(rec.output(), &[7.0]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn forward_matches_triple_loop() {
        let s = spec(&[2, 3, 2], &[ActivationKind::Sigmoid, ActivationKind::Identity], LossKind::MeanSquaredError);
        let p = init_parameters(&s);
        let input = [0.3, -0.9];
        let mut a: Vec<f64> = input.to_vec();
        for (l, layer) in p.layers.iter().enumerate() {
            let mut next = Vec::new();
            for row in 0..layer.weights.len() {
                let mut z = layer.biases[row];
                for col in 0..a.len() {
                    z += layer.weights[row][col] * a[col];
                }
                next.push(if l == 0 { 1.0 / (1.0 + (-z).exp()) } else { z });
            }
            a = next;
        }
        let rec = forward_reference(&s, &p, &input).unwrap();
        assert_eq!(rec.output(), a.as_slice());
    }

    #[test]
    fn forward_rejects_wrong_input_size() {
        let s = spec(&[2, 1], &[ActivationKind::Identity], LossKind::MeanSquaredError);
        let p = ParameterSet::zeros(&s);
        assert!(matches!(forward_reference(&s, &p, &[1.0]), Err(NnError::Shape(_))));
    }

    #[test]
    fn gradients_vanish_at_perfect_softmax_prediction() {
        let s = spec(&[2, 3, 2], &[ActivationKind::Relu, ActivationKind::Softmax], LossKind::CrossEntropy);
        let p = init_parameters(&s);
        let rec = forward_reference(&s, &p, &[0.4, 0.6]).unwrap();
        let target = rec.output().to_vec();
        let g = backward_reference(&s, &p, &rec, &target).unwrap();
        assert!(g.layers.iter().all(|l| l.biases.iter().chain(l.weights.iter().flatten()).all(|&v| v == 0.0)));
    }

    #[test]
    fn scalar_identity_gradient_closed_form() {
        let s = spec(&[1, 1], &[ActivationKind::Identity], LossKind::MeanSquaredError);
        let (w, x, t) = (0.7, 1.9, 0.4);
        let p = ParameterSet { layers: vec![LayerParams { weights: vec![vec![w]], biases: vec![0.0] }] };
        let rec = forward_reference(&s, &p, &[x]).unwrap();
        let g = backward_reference(&s, &p, &rec, &[t]).unwrap();
        assert_eq!(g.layers[0].weights[0][0], 2.0 * (w * x - t) * x);
    }

    #[test]
    fn init_is_deterministic_with_zero_bias_and_bounded() {
        let s = spec(&[2, 3], &[ActivationKind::Relu], LossKind::MeanSquaredError);
        let a = init_parameters(&s);
        assert_eq!(a, init_parameters(&s));
        assert!(a.layers[0].biases.iter().all(|&b| b == 0.0));
        let bound = (6.0f64 / 5.0).sqrt();
        assert!(a.layers[0].weights.iter().flatten().all(|w| w.abs() <= bound));
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(a, init_parameters(&other));
    }
}
