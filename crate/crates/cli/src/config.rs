use std::fs;
use std::path::{Path, PathBuf};

use aeronet::metrics::DatacenterBaseline;
use aeronet::nn::{ActivationKind, LossKind, NetworkSpec, OptimizerKind, Sample};
use aeronet::sim::{Experiment, Preprocessing};
use aeronet::topology::{AssignmentDesign, FormationParams, LinkMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One experiment as written in a TOML or JSON file.
///
/// Only `network.layer_sizes`, `network.activations` and `dataset.path`
/// are required. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    #[serde(default)]
    pub assignment: AssignmentConfig,
    #[serde(default)]
    pub formation: FormationParams,
    #[serde(default)]
    pub link: LinkConfig,
    /// Suppress messages for activations that are exactly zero.
    #[serde(default)]
    pub sparse_forwarding: bool,
    #[serde(default = "default_token")]
    pub auth_token: String,
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<DatacenterBaseline>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<ActivationKind>,
    /// Default `mse`.
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Default 100.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Default plain SGD with learning rate 0.1.
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Default 0.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentConfig {
    /// 1, 2 or 3. Default 1.
    #[serde(default = "default_design")]
    pub design: u8,
    /// Used by designs 2 and 3. Default 2.
    #[serde(default = "default_neurons_per_device")]
    pub neurons_per_device: usize,
    /// Default 1.
    #[serde(default = "default_one")]
    pub controllers_per_layer: usize,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        AssignmentConfig {
            design: default_design(),
            neurons_per_device: default_neurons_per_device(),
            controllers_per_layer: default_one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Wired,
    Wireless,
}

/// Link parameters. Unset values take the defaults of the chosen mode:
/// wired 1e-4 s per hop, wireless 1e-3 s overhead, 3e8 m/s, 2000 m range,
/// 1e8 bit/s for both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub mode: LinkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_hop_latency_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_hop_overhead_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig::from_mode(LinkMode::default_wired())
    }
}

impl LinkConfig {
    pub fn from_mode(mode: LinkMode) -> Self {
        match mode {
            LinkMode::Wired { per_hop_latency_s, bandwidth_bps } => LinkConfig {
                mode: LinkKind::Wired,
                bandwidth_bps: Some(bandwidth_bps),
                per_hop_latency_s: Some(per_hop_latency_s),
                per_hop_overhead_s: None,
                propagation_mps: None,
                range_m: None,
            },
            LinkMode::Wireless { range_m, bandwidth_bps, propagation_mps, per_hop_overhead_s } => LinkConfig {
                mode: LinkKind::Wireless,
                bandwidth_bps: Some(bandwidth_bps),
                per_hop_latency_s: None,
                per_hop_overhead_s: Some(per_hop_overhead_s),
                propagation_mps: Some(propagation_mps),
                range_m: Some(range_m),
            },
        }
    }

    pub fn to_mode(&self) -> LinkMode {
        match (self.mode, LinkMode::default_wired(), LinkMode::default_wireless()) {
            (LinkKind::Wired, LinkMode::Wired { per_hop_latency_s, bandwidth_bps }, _) => LinkMode::Wired {
                per_hop_latency_s: self.per_hop_latency_s.unwrap_or(per_hop_latency_s),
                bandwidth_bps: self.bandwidth_bps.unwrap_or(bandwidth_bps),
            },
            (LinkKind::Wireless, _, LinkMode::Wireless { range_m, bandwidth_bps, propagation_mps, per_hop_overhead_s }) => {
                LinkMode::Wireless {
                    range_m: self.range_m.unwrap_or(range_m),
                    bandwidth_bps: self.bandwidth_bps.unwrap_or(bandwidth_bps),
                    propagation_mps: self.propagation_mps.unwrap_or(propagation_mps),
                    per_hop_overhead_s: self.per_hop_overhead_s.unwrap_or(per_hop_overhead_s),
                }
            }
            _ => unreachable!("default constructors return their own mode"),
        }
    }

    /// Parameters that do nothing in the chosen mode.
    fn stray_fields(&self) -> Vec<&'static str> {
        match self.mode {
            LinkKind::Wired => [
                ("per_hop_overhead_s", self.per_hop_overhead_s.is_some()),
                ("propagation_mps", self.propagation_mps.is_some()),
                ("range_m", self.range_m.is_some()),
            ]
            .into_iter()
            .filter_map(|(n, set)| set.then_some(n))
            .collect(),
            LinkKind::Wireless => {
                if self.per_hop_latency_s.is_some() {
                    vec!["per_hop_latency_s"]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Default `none`.
    #[serde(default)]
    pub preprocessing: Preprocessing,
}

fn default_token() -> String {
    "aeronet".to_string()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("aeronet-out")
}

fn default_loss() -> LossKind {
    LossKind::MeanSquaredError
}

fn default_epochs() -> usize {
    100
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Sgd { learning_rate: 0.1 }
}

fn default_design() -> u8 {
    1
}

fn default_neurons_per_device() -> usize {
    2
}

fn default_one() -> usize {
    1
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub design: Option<u8>,
    pub sparse: Option<bool>,
    pub link: Option<LinkKind>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn spec(&self) -> NetworkSpec {
        let n = &self.network;
        NetworkSpec {
            layer_sizes: n.layer_sizes.clone(),
            activations: n.activations.clone(),
            loss: n.loss,
            epochs: n.epochs,
            optimizer: n.optimizer,
            seed: n.seed,
        }
    }

    pub fn design(&self) -> Option<AssignmentDesign> {
        AssignmentDesign::from_number(self.assignment.design, self.assignment.neurons_per_device)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.network.seed = seed;
        }
        if let Some(design) = o.design {
            self.assignment.design = design;
        }
        if let Some(sparse) = o.sparse {
            self.sparse_forwarding = sparse;
        }
        if let Some(kind) = o.link {
            if kind != self.link.mode {
                self.link = LinkConfig::from_mode(match kind {
                    LinkKind::Wired => LinkMode::default_wired(),
                    LinkKind::Wireless => LinkMode::default_wireless(),
                });
            }
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir.clone_from(dir);
        }
    }

    /// Every configuration problem at once.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = match self.spec().validate() {
            Ok(()) => Vec::new(),
            Err(e) => e,
        };
        match self.design() {
            Some(d) => errors.extend(d.validate()),
            None => errors.push(format!("design must be 1, 2 or 3, got {}", self.assignment.design)),
        }
        if self.assignment.controllers_per_layer == 0 {
            errors.push("controllers_per_layer must be >= 1".to_string());
        }
        errors.extend(self.formation.validate());
        errors.extend(self.link.to_mode().validate());
        for field in self.link.stray_fields() {
            errors.push(format!("link field {field} does not apply to {:?} links", self.link.mode));
        }
        if self.auth_token.is_empty() {
            errors.push("auth_token must not be empty".to_string());
        }
        if let Some(b) = &self.baseline {
            errors.extend(b.validate());
        }
        errors
    }

    /// The config with every default written out and every path absolute.
    pub fn effective(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.link = LinkConfig::from_mode(self.link.to_mode());
        c
    }

    pub fn experiment(&self, dataset: Vec<Sample>) -> Result<Experiment, CliError> {
        let design = self.design().ok_or_else(|| CliError::Config(self.validate()))?;
        let mut exp = Experiment::new(self.spec(), design, dataset);
        exp.controllers_per_layer = self.assignment.controllers_per_layer;
        exp.formation = self.formation;
        exp.link = self.link.to_mode();
        exp.sparse_forwarding = self.sparse_forwarding;
        exp.auth_token.clone_from(&self.auth_token);
        exp.preprocessing = self.dataset.preprocessing;
        Ok(exp)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }
}

/// Reads, parses and validates a config file. TOML unless the extension
/// is `.json`.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let mut config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(vec![format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())])
        })?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?
    };
    let base = path.parent().unwrap_or(Path::new("."));
    if config.dataset.path.is_relative() {
        config.dataset.path = base.join(&config.dataset.path);
    }
    let mut errors = config.validate();
    match fs::canonicalize(&config.dataset.path) {
        Ok(p) => config.dataset.path = p,
        Err(e) => errors.push(format!("dataset {}: {e}", config.dataset.path.display())),
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    Ok(config)
}
