use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::link::{link_latency, LinkMode};
use super::{Assignment, Position, TopologyError};
use crate::nn::NetworkSpec;
use crate::protocol::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationParams {
    pub layer_spacing_m: f64,
    pub lateral_spacing_m: f64,
    #[serde(default = "default_altitude")]
    pub altitude_m: f64,
}

fn default_altitude() -> f64 {
    1000.0
}

impl Default for FormationParams {
    fn default() -> Self {
        FormationParams { layer_spacing_m: 100.0, lateral_spacing_m: 50.0, altitude_m: default_altitude() }
    }
}

impl FormationParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(self.layer_spacing_m > 0.0 && self.layer_spacing_m.is_finite()) {
            errors.push("layer_spacing_m must be > 0".to_string());
        }
        if !(self.lateral_spacing_m > 0.0 && self.lateral_spacing_m.is_finite()) {
            errors.push("lateral_spacing_m must be > 0".to_string());
        }
        if !self.altitude_m.is_finite() {
            errors.push("altitude_m must be finite".to_string());
        }
        errors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationPlan {
    pub positions: BTreeMap<DeviceId, Position>,
    pub link_mode: LinkMode,
}

impl FormationPlan {
    pub fn position(&self, device: &DeviceId) -> Result<&Position, TopologyError> {
        self.positions.get(device).ok_or_else(|| TopologyError::UnknownDevice(device.clone()))
    }

    /// Delay of one message between two planned devices. A device talking
    /// to itself pays nothing.
    pub fn latency(&self, src: &DeviceId, dst: &DeviceId, size_bytes: usize) -> Result<f64, TopologyError> {
        if src == dst {
            return Ok(0.0);
        }
        let (a, b) = (self.position(src)?, self.position(dst)?);
        link_latency(&self.link_mode, a, b, size_bytes).map_err(|e| match e {
            TopologyError::OutOfRange { distance_m, range_m } => {
                TopologyError::Disconnected { src: src.clone(), dst: dst.clone(), distance_m, range_m }
            }
            other => other,
        })
    }
}

/// Lateral offsets for `count` slots spaced `spacing` apart, centered on 0.
fn lateral_slots(count: usize, spacing: f64) -> Vec<f64> {
    let center = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| (i as f64 - center) * spacing).collect()
}

/// Layer-major grid at constant altitude.
///
/// Layer `l` flies at `x = l·layer_spacing`, its hosting devices ordered
/// by lowest neuron index along `y`; separate controllers sit further out
/// on `y`. Master and input provider fly one spacing ahead of layer 0, the
/// output receiver one spacing behind the last layer.
pub fn plan_formation(assignment: &Assignment, spec: &NetworkSpec, params: &FormationParams, link_mode: LinkMode) -> FormationPlan {
    let sp = params.layer_spacing_m;
    let lat = params.lateral_spacing_m;
    let z = params.altitude_m;
    let mut positions = BTreeMap::new();
    for (layer, devices) in assignment.layer_devices.iter().enumerate() {
        let x = layer as f64 * sp;
        let ys = lateral_slots(devices.len(), lat);
        for (device, &y) in devices.iter().zip(&ys) {
            positions.insert(device.clone(), Position::new(x, y, z));
        }
        let mut next_y = ys.last().copied().unwrap_or(0.0);
        for shard in assignment.controllers.iter().filter(|c| c.layer == layer) {
            if !positions.contains_key(&shard.device) {
                next_y += lat;
                positions.insert(shard.device.clone(), Position::new(x, next_y, z));
            }
        }
    }
    positions.insert(assignment.input_provider.clone(), Position::new(-sp, 0.0, z));
    positions.insert(assignment.master.clone(), Position::new(-sp, lat, z));
    positions.insert(assignment.output_receiver.clone(), Position::new(spec.layer_count() as f64 * sp, 0.0, z));
    FormationPlan { positions, link_mode }
}

fn edge(a: &DeviceId, b: &DeviceId) -> Option<(DeviceId, DeviceId)> {
    match a.cmp(b) {
        std::cmp::Ordering::Less => Some((a.clone(), b.clone())),
        std::cmp::Ordering::Greater => Some((b.clone(), a.clone())),
        std::cmp::Ordering::Equal => None,
    }
}

/// Every device pair that exchanges messages, as unordered pairs.
///
/// Data plane: input provider to layer 0, each layer to the next, last
/// layer to the output receiver. Control plane: hosts to their
/// controllers, controllers and the output receiver to the master, and the
/// master to every device for registration and navigation.
pub fn required_edges(assignment: &Assignment, spec: &NetworkSpec) -> BTreeSet<(DeviceId, DeviceId)> {
    let mut edges = BTreeSet::new();
    let mut add = |a: &DeviceId, b: &DeviceId| {
        if let Some(e) = edge(a, b) {
            edges.insert(e);
        }
    };
    for d in &assignment.layer_devices[0] {
        add(&assignment.input_provider, d);
    }
    for pair in assignment.layer_devices.windows(2) {
        for a in &pair[0] {
            for b in &pair[1] {
                add(a, b);
            }
        }
    }
    for d in &assignment.layer_devices[spec.output_layer()] {
        add(d, &assignment.output_receiver);
    }
    for shard in &assignment.controllers {
        for n in shard.neurons.iter() {
            add(assignment.host_of(shard.layer, n), &shard.device);
        }
        add(&shard.device, &assignment.master);
    }
    for d in assignment.devices() {
        add(&assignment.master, d);
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityViolation {
    pub a: DeviceId,
    pub b: DeviceId,
    pub distance_m: f64,
    pub range_m: f64,
}

/// Checks every required edge against the wireless range. Wired plans
/// always pass.
pub fn check_connectivity(
    plan: &FormationPlan,
    assignment: &Assignment,
    spec: &NetworkSpec,
) -> Result<(), Vec<ConnectivityViolation>> {
    let Some(range_m) = plan.link_mode.range_m() else {
        return Ok(());
    };
    let mut violations = Vec::new();
    for (a, b) in required_edges(assignment, spec) {
        let distance_m = match (plan.positions.get(&a), plan.positions.get(&b)) {
            (Some(pa), Some(pb)) => pa.distance(pb),
            _ => f64::INFINITY,
        };
        if distance_m > range_m {
            violations.push(ConnectivityViolation { a, b, distance_m, range_m });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Serialize)]
struct FormationLine<'a> {
    device: &'a DeviceId,
    roles: Vec<String>,
    kind: &'a str,
    x: f64,
    y: f64,
    z: f64,
}

/// One JSON object per device, ordered by device id.
pub fn export_formation(plan: &FormationPlan, assignment: &Assignment) -> String {
    let mut out = String::new();
    for (device, pos) in &plan.positions {
        let line = FormationLine {
            device,
            roles: assignment.roles_of(device).iter().map(|r| r.to_string()).collect(),
            kind: assignment.fleet.get(device).map_or("unknown", |k| k.name()),
            x: pos.x,
            y: pos.y,
            z: pos.z,
        };
        out.push_str(&serde_json::to_string(&line).expect("formation lines serialize"));
        out.push('\n');
    }
    out
}
