use serde::{Deserialize, Serialize};

use super::NnError;

/// Per-neuron activation function.
///
/// `Softmax` couples every neuron of a layer and is only legal on the
/// output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl ActivationKind {
    pub fn is_elementwise(self) -> bool {
        !matches!(self, ActivationKind::Softmax)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Softmax => "softmax",
            ActivationKind::Identity => "identity",
        }
    }
}

/// Applies an elementwise activation to a single pre-activation.
///
/// Neuron hosts call this directly; [`activate`] uses the same function
/// so the two paths agree bit for bit.
pub fn activate_scalar(kind: ActivationKind, z: f64) -> Result<f64, NnError> {
    if !z.is_finite() {
        return Err(NnError::Numeric("activation input".into()));
    }
    let a = match kind {
        ActivationKind::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        ActivationKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        ActivationKind::Identity => z,
        ActivationKind::Softmax => return Err(NnError::UnsupportedActivation(kind)),
    };
    Ok(a)
}

pub fn activate(kind: ActivationKind, z: &[f64]) -> Result<Vec<f64>, NnError> {
    match kind {
        ActivationKind::Softmax => softmax(z),
        _ => z.iter().map(|&v| activate_scalar(kind, v)).collect(),
    }
}

fn softmax(z: &[f64]) -> Result<Vec<f64>, NnError> {
    if z.is_empty() {
        return Err(NnError::Shape("softmax of an empty vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(NnError::Numeric("softmax input".into()));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let mut total = 0.0;
    for e in &exps {
        total += e;
    }
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Elementwise derivative of an activation, given both the pre-activation
/// `z` and the activation `a = activate(kind, z)`.
///
/// The ReLU derivative at exactly zero is 0. Softmax is rejected: its
/// derivative only appears fused with cross-entropy in the output delta.
pub fn activation_derivative(kind: ActivationKind, z: &[f64], a: &[f64]) -> Result<Vec<f64>, NnError> {
    if z.len() != a.len() {
        return Err(NnError::Shape(format!(
            "derivative needs matching z ({}) and a ({})",
            z.len(),
            a.len()
        )));
    }
    let derivative = |(&zi, &ai): (&f64, &f64)| match kind {
        ActivationKind::Relu => Ok(if zi > 0.0 { 1.0 } else { 0.0 }),
        ActivationKind::Sigmoid => Ok(ai * (1.0 - ai)),
        ActivationKind::Identity => Ok(1.0),
        ActivationKind::Softmax => Err(NnError::UnsupportedActivation(kind)),
    };
    z.iter().zip(a).map(derivative).collect()
}
