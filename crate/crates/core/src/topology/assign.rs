use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DeviceKind;
use crate::nn::NetworkSpec;
use crate::protocol::{DeviceId, NeuronRange, Role};

/// How neurons are packed onto devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum AssignmentDesign {
    /// Every neuron on its own device; controllers on their own devices.
    OneNeuronPerDevice,
    /// Up to `neurons_per_device` neurons of one layer per device.
    LayerGrouped { neurons_per_device: usize },
    /// As `LayerGrouped`, with each controller riding on the lowest-indexed
    /// device of its shard.
    LayerGroupedWithController { neurons_per_device: usize },
}

impl AssignmentDesign {
    /// Designs numbered 1 to 3; `k` is ignored by design 1.
    pub fn from_number(n: u8, k: usize) -> Option<Self> {
        match n {
            1 => Some(AssignmentDesign::OneNeuronPerDevice),
            2 => Some(AssignmentDesign::LayerGrouped { neurons_per_device: k }),
            3 => Some(AssignmentDesign::LayerGroupedWithController { neurons_per_device: k }),
            _ => None,
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            AssignmentDesign::OneNeuronPerDevice => 1,
            AssignmentDesign::LayerGrouped { .. } => 2,
            AssignmentDesign::LayerGroupedWithController { .. } => 3,
        }
    }

    pub fn neurons_per_device(&self) -> usize {
        match *self {
            AssignmentDesign::OneNeuronPerDevice => 1,
            AssignmentDesign::LayerGrouped { neurons_per_device }
            | AssignmentDesign::LayerGroupedWithController { neurons_per_device } => neurons_per_device,
        }
    }

    pub fn colocates_controllers(&self) -> bool {
        matches!(self, AssignmentDesign::LayerGroupedWithController { .. })
    }

    pub fn validate(&self) -> Vec<String> {
        if self.neurons_per_device() == 0 {
            vec!["neurons_per_device must be >= 1".to_string()]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerShard {
    pub layer: usize,
    pub neurons: NeuronRange,
    pub device: DeviceId,
}

/// Which device plays which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub design: AssignmentDesign,
    pub master: DeviceId,
    pub input_provider: DeviceId,
    pub output_receiver: DeviceId,
    /// `hosts[layer][neuron]` is the device hosting that neuron.
    pub hosts: Vec<Vec<DeviceId>>,
    /// Hosting devices of each layer, ordered by lowest hosted neuron.
    pub layer_devices: Vec<Vec<DeviceId>>,
    /// Controller shards, ordered by layer then range.
    pub controllers: Vec<ControllerShard>,
    pub fleet: BTreeMap<DeviceId, DeviceKind>,
}

impl Assignment {
    pub fn host_of(&self, layer: usize, neuron: usize) -> &DeviceId {
        &self.hosts[layer][neuron]
    }

    pub fn controller_of(&self, layer: usize, neuron: usize) -> &ControllerShard {
        self.controllers
            .iter()
            .find(|c| c.layer == layer && c.neurons.contains(neuron))
            .expect("every non-input neuron belongs to a controller shard")
    }

    pub fn device_count(&self) -> usize {
        self.fleet.len()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceId> {
        self.fleet.keys()
    }

    /// The layer and neuron indices hosted on `device`, if any.
    pub fn hosted_neurons(&self, device: &DeviceId) -> Option<(usize, Vec<usize>)> {
        self.hosts.iter().enumerate().find_map(|(layer, row)| {
            let neurons: Vec<usize> = row.iter().enumerate().filter(|(_, d)| *d == device).map(|(i, _)| i).collect();
            (!neurons.is_empty()).then_some((layer, neurons))
        })
    }

    pub fn controllers_on<'a>(&'a self, device: &'a DeviceId) -> impl Iterator<Item = &'a ControllerShard> + 'a {
        self.controllers.iter().filter(move |c| &c.device == device)
    }

    /// Roles `device` registers with, hosted neurons first.
    pub fn roles_of(&self, device: &DeviceId) -> Vec<Role> {
        let mut roles = Vec::new();
        if device == &self.master {
            roles.push(Role::Master);
        }
        if device == &self.input_provider {
            roles.push(Role::InputProvider);
        }
        if device == &self.output_receiver {
            roles.push(Role::OutputReceiver);
        }
        if let Some((layer, neurons)) = self.hosted_neurons(device) {
            roles.push(Role::NeuronHost { layer, neurons });
        }
        for shard in self.controllers_on(device) {
            roles.push(Role::LayerController { layer: shard.layer, neurons: shard.neurons });
        }
        roles
    }

    pub fn set_kind(&mut self, device: &DeviceId, kind: DeviceKind) {
        if let Some(k) = self.fleet.get_mut(device) {
            *k = kind;
        }
    }
}

pub(crate) fn host_id(layer: usize, device: usize) -> DeviceId {
    DeviceId::new(format!("host-l{layer:02}-d{device:03}"))
}

pub(crate) fn controller_id(layer: usize, shard: usize) -> DeviceId {
    DeviceId::new(format!("ctrl-l{layer:02}-s{shard:02}"))
}

/// Contiguous shards of `size` neurons, as even as possible, larger first.
pub(crate) fn shard_ranges(size: usize, shards: usize) -> Vec<NeuronRange> {
    let count = shards.clamp(1, size.max(1));
    let (base, extra) = (size / count, size % count);
    let mut start = 0;
    (0..count)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let range = NeuronRange::new(start, start + len);
            start += len;
            range
        })
        .collect()
}

/// Assignment with one controller per non-input layer.
pub fn assign_neurons(spec: &NetworkSpec, design: AssignmentDesign) -> Assignment {
    assign_neurons_sharded(spec, design, 1)
}

/// Packs neurons in ascending index order; each non-input layer is split
/// into `controllers_per_layer` contiguous controller shards.
pub fn assign_neurons_sharded(spec: &NetworkSpec, design: AssignmentDesign, controllers_per_layer: usize) -> Assignment {
    let per_device = design.neurons_per_device().max(1);
    let mut fleet = BTreeMap::new();
    let master = DeviceId::new("master");
    let input_provider = DeviceId::new("input-provider");
    let output_receiver = DeviceId::new("output-receiver");
    fleet.insert(master.clone(), DeviceKind::Airplane);
    fleet.insert(input_provider.clone(), DeviceKind::UnmannedAerialVehicle);
    fleet.insert(output_receiver.clone(), DeviceKind::UnmannedAerialVehicle);

    let mut hosts = Vec::with_capacity(spec.layer_count());
    let mut layer_devices = Vec::with_capacity(spec.layer_count());
    for (layer, &size) in spec.layer_sizes.iter().enumerate() {
        let row: Vec<DeviceId> = (0..size).map(|n| host_id(layer, n / per_device)).collect();
        let mut devices: Vec<DeviceId> = Vec::new();
        for d in &row {
            if devices.last() != Some(d) {
                devices.push(d.clone());
            }
        }
        for d in &devices {
            fleet.insert(d.clone(), DeviceKind::Drone);
        }
        hosts.push(row);
        layer_devices.push(devices);
    }

    let mut controllers = Vec::new();
    for (layer, &size) in spec.layer_sizes.iter().enumerate().skip(1) {
        for (s, range) in shard_ranges(size, controllers_per_layer).into_iter().enumerate() {
            let device = if design.colocates_controllers() {
                hosts[layer][range.start].clone()
            } else {
                let id = controller_id(layer, s);
                fleet.insert(id.clone(), DeviceKind::Helicopter);
                id
            };
            controllers.push(ControllerShard { layer, neurons: range, device });
        }
    }

    Assignment { design, master, input_provider, output_receiver, hosts, layer_devices, controllers, fleet }
}

/// Closed-form device count: hosting devices, plus separate controller
/// devices unless co-located, plus master, input provider and output
/// receiver.
pub fn expected_device_count(spec: &NetworkSpec, design: AssignmentDesign, controllers_per_layer: usize) -> usize {
    let k = design.neurons_per_device().max(1);
    let hosting: usize = spec.layer_sizes.iter().map(|n| n.div_ceil(k)).sum();
    let controllers: usize = if design.colocates_controllers() {
        0
    } else {
        spec.layer_sizes[1..].iter().map(|&n| controllers_per_layer.clamp(1, n)).sum()
    };
    hosting + controllers + 3
}
