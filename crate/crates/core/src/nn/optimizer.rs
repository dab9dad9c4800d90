use serde::{Deserialize, Serialize};

use super::network::{GradientSet, LayerParams, ParameterSet};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerKind::Adam {
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let lr = match *self {
            OptimizerKind::Sgd { learning_rate } => learning_rate,
            OptimizerKind::Adam { learning_rate, beta1, beta2, epsilon } => {
                for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
                    if !(0.0..1.0).contains(&beta) {
                        if beta >= 1.0 {
                            errors.push(format!("{name} must be < 1"));
                        } else {
                            errors.push(format!("{name} must be >= 0"));
                        }
                    }
                }
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    errors.push("epsilon must be > 0".to_string());
                }
                learning_rate
            }
        };
        if !(lr > 0.0 && lr.is_finite()) {
            errors.push("learning_rate must be > 0".to_string());
        }
        errors
    }

    /// Fresh optimizer state for `params`, if this optimizer keeps any.
    pub fn init_state(&self, params: &ParameterSet) -> Option<AdamState> {
        match self {
            OptimizerKind::Sgd { .. } => None,
            OptimizerKind::Adam { .. } => Some(AdamState::new(params)),
        }
    }
}

/// First and second moment estimates plus the shared step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<LayerParams>,
    pub second_moment: Vec<LayerParams>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterSet) -> Self {
        let zeros: Vec<LayerParams> = params
            .layers
            .iter()
            .map(|l| LayerParams::zeros(l.biases.len(), l.weights.first().map_or(0, Vec::len)))
            .collect();
        AdamState { first_moment: zeros.clone(), second_moment: zeros, step: 0 }
    }
}

struct AdamStep {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    correction1: f64,
    correction2: f64,
}

impl AdamStep {
    fn apply(&self, p: f64, g: f64, m: &mut f64, v: &mut f64) -> f64 {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / self.correction1;
        let v_hat = *v / self.correction2;
        p - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon)
    }
}

/// One optimizer update. Adam advances `state` in place.
pub fn optimizer_step(
    kind: &OptimizerKind,
    state: Option<&mut AdamState>,
    params: &ParameterSet,
    grads: &GradientSet,
) -> Result<ParameterSet, NnError> {
    if !params.same_shape_as(&grads.layers) {
        return Err(NnError::Shape("gradients do not match parameters".into()));
    }
    let mut next = params.clone();
    match *kind {
        OptimizerKind::Sgd { learning_rate } => {
            for (layer, g) in next.layers.iter_mut().zip(&grads.layers) {
                for (row, grow) in layer.weights.iter_mut().zip(&g.weights) {
                    for (w, gw) in row.iter_mut().zip(grow) {
                        *w -= learning_rate * gw;
                    }
                }
                for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                    *b -= learning_rate * gb;
                }
            }
        }
        OptimizerKind::Adam { learning_rate, beta1, beta2, epsilon } => {
            let state = state.ok_or_else(|| NnError::Config("adam requires optimizer state".into()))?;
            if !params.same_shape_as(&state.first_moment) || !params.same_shape_as(&state.second_moment) {
                return Err(NnError::Shape("adam state does not match parameters".into()));
            }
            state.step += 1;
            let t = i32::try_from(state.step).unwrap_or(i32::MAX);
            let step = AdamStep {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                correction1: 1.0 - beta1.powi(t),
                correction2: 1.0 - beta2.powi(t),
            };
            let moments = state.first_moment.iter_mut().zip(state.second_moment.iter_mut());
            for ((layer, g), (m, v)) in next.layers.iter_mut().zip(&grads.layers).zip(moments) {
                for (i, row) in layer.weights.iter_mut().enumerate() {
                    for (j, w) in row.iter_mut().enumerate() {
                        *w = step.apply(*w, g.weights[i][j], &mut m.weights[i][j], &mut v.weights[i][j]);
                    }
                }
                for (i, b) in layer.biases.iter_mut().enumerate() {
                    *b = step.apply(*b, g.biases[i], &mut m.biases[i], &mut v.biases[i]);
                }
            }
        }
    }
    if !next.is_finite() {
        return Err(NnError::Numeric("optimizer produced non-finite parameters".into()));
    }
    Ok(next)
}
