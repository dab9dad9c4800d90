use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nn::{NetworkSpec, Sample};
use crate::protocol::{DeviceId, Message};
use crate::topology::{AssignmentDesign, FormationParams, LinkMode};

/// Input transformation applied by the input provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    #[default]
    None,
    /// Per-feature `(x - min) / (max - min)`, with bounds taken from the
    /// whole dataset before training. Constant features map to 0.
    MinMaxNormalize,
}

/// Preprocessing with its parameters fitted to a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Preprocessor {
    Identity,
    MinMax { min: Vec<f64>, max: Vec<f64> },
}

impl Preprocessor {
    pub fn fit(kind: Preprocessing, dataset: &[Sample]) -> Self {
        match kind {
            Preprocessing::None => Preprocessor::Identity,
            Preprocessing::MinMaxNormalize => {
                let width = dataset.first().map_or(0, |s| s.input.len());
                let mut min = vec![f64::INFINITY; width];
                let mut max = vec![f64::NEG_INFINITY; width];
                for sample in dataset {
                    for (i, &x) in sample.input.iter().enumerate().take(width) {
                        min[i] = min[i].min(x);
                        max[i] = max[i].max(x);
                    }
                }
                Preprocessor::MinMax { min, max }
            }
        }
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        match self {
            Preprocessor::Identity => input.to_vec(),
            Preprocessor::MinMax { min, max } => input
                .iter()
                .zip(min.iter().zip(max))
                .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
                .collect(),
        }
    }
}

/// The dataset as the network sees it. Targets pass through untouched.
pub fn preprocess(kind: Preprocessing, dataset: &[Sample]) -> Vec<Sample> {
    let p = Preprocessor::fit(kind, dataset);
    dataset.iter().map(|s| Sample::new(p.apply(&s.input), s.target.clone())).collect()
}

/// A message pushed into the network by a device outside the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogueInjection {
    pub time: f64,
    pub src: DeviceId,
    pub dst: DeviceId,
    pub port: Option<usize>,
    pub message: Message,
}

/// Everything one simulated training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub spec: NetworkSpec,
    pub design: AssignmentDesign,
    pub controllers_per_layer: usize,
    pub formation: FormationParams,
    pub link: LinkMode,
    pub sparse_forwarding: bool,
    pub auth_token: String,
    pub dataset: Vec<Sample>,
    pub preprocessing: Preprocessing,
    /// Tokens presented by specific devices instead of `auth_token`.
    pub device_tokens: BTreeMap<DeviceId, String>,
    pub rogue: Vec<RogueInjection>,
}

impl Experiment {
    /// Experiment with one controller per layer, default formation, wired
    /// links, dense forwarding and no preprocessing.
    pub fn new(spec: NetworkSpec, design: AssignmentDesign, dataset: Vec<Sample>) -> Self {
        Experiment {
            spec,
            design,
            controllers_per_layer: 1,
            formation: FormationParams::default(),
            link: LinkMode::default_wired(),
            sparse_forwarding: false,
            auth_token: "aeronet".to_string(),
            dataset,
            preprocessing: Preprocessing::None,
            device_tokens: BTreeMap::new(),
            rogue: Vec::new(),
        }
    }

    /// All problems at once; empty means the experiment can run.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = match self.spec.validate() {
            Ok(()) => Vec::new(),
            Err(e) => e,
        };
        errors.extend(self.design.validate());
        errors.extend(self.formation.validate());
        errors.extend(self.link.validate());
        if self.controllers_per_layer == 0 {
            errors.push("controllers_per_layer must be >= 1".to_string());
        }
        if self.auth_token.is_empty() {
            errors.push("auth_token must not be empty".to_string());
        }
        if self.dataset.is_empty() {
            errors.push("dataset must not be empty".to_string());
        }
        if let (Some(&inputs), Some(&outputs)) = (self.spec.layer_sizes.first(), self.spec.layer_sizes.last()) {
            for (row, s) in self.dataset.iter().enumerate() {
                if s.input.len() != inputs || s.target.len() != outputs {
                    errors.push(format!(
                        "sample {row} has {} inputs and {} targets, expected {inputs} and {outputs}",
                        s.input.len(),
                        s.target.len()
                    ));
                } else if s.input.iter().chain(&s.target).any(|v| !v.is_finite()) {
                    errors.push(format!("sample {row} has a non-finite value"));
                }
            }
        }
        for r in &self.rogue {
            if !(r.time >= 0.0 && r.time.is_finite()) {
                errors.push(format!("rogue injection from {} has an invalid time", r.src));
            }
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_midpoint() {
        let data = vec![Sample::new(vec![0.0, 3.0], vec![0.0]), Sample::new(vec![10.0, 3.0], vec![1.0])];
        let p = Preprocessor::fit(Preprocessing::MinMaxNormalize, &data);
        assert_eq!(p.apply(&[5.0, 3.0]), vec![0.5, 0.0]);
        let out = preprocess(Preprocessing::MinMaxNormalize, &data);
        assert_eq!(out[1].input, vec![1.0, 0.0]);
        assert_eq!(out[1].target, vec![1.0]);
    }

    #[test]
    fn identity_leaves_inputs() {
        let data = vec![Sample::new(vec![-2.0], vec![1.0])];
        assert_eq!(preprocess(Preprocessing::None, &data), data);
    }
}
