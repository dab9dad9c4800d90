use serde::{Deserialize, Serialize};

use super::activation::{activation_derivative, ActivationKind};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[serde(rename = "mse")]
    MeanSquaredError,
    CrossEntropy,
}

impl LossKind {
    /// Whether `output_delta` is defined for this loss on top of `activation`
    /// with `outputs` output neurons.
    pub fn supports(self, activation: ActivationKind, outputs: usize) -> bool {
        match (self, activation) {
            (LossKind::MeanSquaredError, ActivationKind::Softmax) => false,
            (LossKind::MeanSquaredError, _) => true,
            (LossKind::CrossEntropy, ActivationKind::Softmax) => true,
            (LossKind::CrossEntropy, ActivationKind::Sigmoid) => outputs == 1,
            (LossKind::CrossEntropy, _) => false,
        }
    }
}

fn check_lengths(what: &str, prediction: &[f64], target: &[f64]) -> Result<(), NnError> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(NnError::Shape(format!(
            "{what}: prediction has {} entries, target has {}",
            prediction.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Loss of one sample.
///
/// MSE is `(1/n) Σ (p - t)²`; cross-entropy is `-Σ t ln p` and requires
/// every prediction to be strictly positive.
pub fn compute_loss(kind: LossKind, prediction: &[f64], target: &[f64]) -> Result<f64, NnError> {
    check_lengths("loss", prediction, target)?;
    let loss = match kind {
        LossKind::MeanSquaredError => {
            let mut sum = 0.0;
            for (p, t) in prediction.iter().zip(target) {
                let diff = p - t;
                sum += diff * diff;
            }
            sum / prediction.len() as f64
        }
        LossKind::CrossEntropy => {
            let mut sum = 0.0;
            for (&p, &t) in prediction.iter().zip(target) {
                if p <= 0.0 || !p.is_finite() {
                    return Err(NnError::Numeric(format!("log of non-positive prediction {p}")));
                }
                sum += t * p.ln();
            }
            -sum
        }
    };
    if !loss.is_finite() {
        return Err(NnError::Numeric("loss".into()));
    }
    Ok(loss)
}

/// Gradient of the sample loss with respect to the output pre-activations.
///
/// Cross-entropy over softmax uses the fused `p - t` form. Cross-entropy
/// over a single sigmoid output is the exact derivative of `-t ln p`,
/// i.e. `-t (1 - p)`. MSE returns `(2/n)(p - t) ⊙ f'(z)`.
pub fn output_delta(
    loss: LossKind,
    activation: ActivationKind,
    prediction: &[f64],
    z_out: &[f64],
    target: &[f64],
) -> Result<Vec<f64>, NnError> {
    check_lengths("output delta", prediction, target)?;
    if z_out.len() != prediction.len() {
        return Err(NnError::Shape("output delta: z and prediction differ in length".into()));
    }
    if !loss.supports(activation, prediction.len()) {
        return Err(NnError::Config(format!(
            "loss {loss:?} cannot be combined with {} output over {} neurons",
            activation.name(),
            prediction.len()
        )));
    }
    let delta = match (loss, activation) {
        (LossKind::CrossEntropy, ActivationKind::Softmax) => {
            prediction.iter().zip(target).map(|(p, t)| p - t).collect()
        }
        (LossKind::CrossEntropy, _) => {
            prediction.iter().zip(target).map(|(p, t)| -t * (1.0 - p)).collect()
        }
        (LossKind::MeanSquaredError, _) => {
            let scale = 2.0 / prediction.len() as f64;
            let derivative = activation_derivative(activation, z_out, prediction)?;
            prediction
                .iter()
                .zip(target)
                .zip(derivative)
                .map(|((p, t), d)| scale * (p - t) * d)
                .collect()
        }
    };
    Ok(delta)
}

/// Mean of per-sample losses, summed in the order given.
pub fn mean_loss(losses: &[f64]) -> f64 {
    if losses.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for l in losses {
        sum += l;
    }
    sum / losses.len() as f64
}
