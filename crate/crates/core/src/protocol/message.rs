use std::fmt;

use serde::{Deserialize, Serialize};

use crate::nn::ActivationKind;
use crate::topology::{DeviceKind, Position};

/// Opaque device identifier, unique within a fleet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(String);

impl DeviceId {
    pub fn new(id: impl Into<String>) -> Self {
        DeviceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId::new(s)
    }
}

/// Half-open span `start..end` of neuron indices within one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronRange {
    pub start: usize,
    pub end: usize,
}

impl NeuronRange {
    pub fn new(start: usize, end: usize) -> Self {
        NeuronRange { start, end }
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..self.end).contains(&index)
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &NeuronRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// One logical role a device plays. Layer indices count the input layer
/// as 0; controllers only exist for layers ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Role {
    Master,
    LayerController { layer: usize, neurons: NeuronRange },
    NeuronHost { layer: usize, neurons: Vec<usize> },
    InputProvider,
    OutputReceiver,
}

impl Role {
    fn integer_fields(&self) -> usize {
        // tag + role-specific integers
        1 + match self {
            Role::LayerController { .. } => 3,
            Role::NeuronHost { neurons, .. } => 2 + neurons.len(),
            _ => 0,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Master => f.write_str("master"),
            Role::LayerController { layer, neurons } => {
                write!(f, "controller[{layer}:{}..{}]", neurons.start, neurons.end)
            }
            Role::NeuronHost { layer, neurons } => {
                let list: Vec<String> = neurons.iter().map(|n| n.to_string()).collect();
                write!(f, "host[{layer}:{}]", list.join(","))
            }
            Role::InputProvider => f.write_str("input_provider"),
            Role::OutputReceiver => f.write_str("output_receiver"),
        }
    }
}

/// Gradient of one neuron inside a [`Message::GradientBatch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronGradient {
    pub neuron_index: usize,
    pub weight_grads: Vec<f64>,
    pub bias_grad: f64,
}

/// Every protocol unit exchanged between devices.
///
/// Neuron-addressed data messages (`InputVector`, `ForwardActivation`,
/// `OutputVector`, `BackwardDelta`) travel one per neuron edge; the
/// receiving neuron is named by the envelope port. `ForwardActivation`
/// and `BackwardDelta` name the neuron whose value or delta they carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "payload")]
pub enum Message {
    RegisterRequest {
        device_id: DeviceId,
        roles: Vec<Role>,
        auth_token: String,
        device_kind: DeviceKind,
    },
    RegisterResponse {
        admitted: bool,
        reason: String,
    },
    NavigationInstruction {
        device_id: DeviceId,
        position: Position,
    },
    NeuronConfig {
        layer_index: usize,
        neuron_index: usize,
        incoming_weights: Vec<f64>,
        bias: f64,
        activation: ActivationKind,
    },
    ForwardActivation {
        sample_id: u64,
        layer_index: usize,
        neuron_index: usize,
        value: f64,
    },
    /// Lists the neurons of `layer_index` on the sending device whose
    /// activation was exactly zero and therefore not forwarded.
    SparseMask {
        sample_id: u64,
        layer_index: usize,
        suppressed: Vec<usize>,
    },
    InputVector {
        sample_id: u64,
        values: Vec<f64>,
    },
    /// Output neuron `(z, a)` for one port of the output receiver.
    OutputVector {
        sample_id: u64,
        values: Vec<f64>,
    },
    LossReport {
        epoch: usize,
        sample_id: u64,
        loss_value: f64,
        output_delta_vector: Vec<f64>,
    },
    BackwardDelta {
        sample_id: u64,
        layer_index: usize,
        neuron_index: usize,
        delta_value: f64,
    },
    GradientReport {
        layer_index: usize,
        neuron_index: usize,
        weight_grads: Vec<f64>,
        bias_grad: f64,
        sample_id: u64,
    },
    /// A layer controller's shard of gradient reports for one sample.
    GradientBatch {
        sample_id: u64,
        layer_index: usize,
        gradients: Vec<NeuronGradient>,
    },
    WeightUpdate {
        layer_index: usize,
        neuron_index: usize,
        new_weights: Vec<f64>,
        new_bias: f64,
    },
    /// Host acknowledges its configuration (`sample_id: None`) or the
    /// weight update that closed `sample_id`.
    NeuronAck {
        layer_index: usize,
        neuron_index: usize,
        sample_id: Option<u64>,
    },
    /// Controller acknowledges that every neuron of its shard acked.
    ShardAck {
        layer_index: usize,
        neurons: NeuronRange,
        sample_id: Option<u64>,
    },
    EpochBarrier {
        epoch: usize,
    },
    /// Master lets the input provider emit the next sample.
    SampleRelease {
        epoch: usize,
        sample_id: u64,
    },
}

pub const HEADER_BYTES: usize = 32;
const REAL_BYTES: usize = 8;
const INT_BYTES: usize = 8;

impl Message {
    pub fn variant(&self) -> &'static str {
        match self {
            Message::RegisterRequest { .. } => "RegisterRequest",
            Message::RegisterResponse { .. } => "RegisterResponse",
            Message::NavigationInstruction { .. } => "NavigationInstruction",
            Message::NeuronConfig { .. } => "NeuronConfig",
            Message::ForwardActivation { .. } => "ForwardActivation",
            Message::SparseMask { .. } => "SparseMask",
            Message::InputVector { .. } => "InputVector",
            Message::OutputVector { .. } => "OutputVector",
            Message::LossReport { .. } => "LossReport",
            Message::BackwardDelta { .. } => "BackwardDelta",
            Message::GradientReport { .. } => "GradientReport",
            Message::GradientBatch { .. } => "GradientBatch",
            Message::WeightUpdate { .. } => "WeightUpdate",
            Message::NeuronAck { .. } => "NeuronAck",
            Message::ShardAck { .. } => "ShardAck",
            Message::EpochBarrier { .. } => "EpochBarrier",
            Message::SampleRelease { .. } => "SampleRelease",
        }
    }

    /// Registration traffic is the only traffic allowed before admission.
    pub fn is_registration(&self) -> bool {
        matches!(self, Message::RegisterRequest { .. } | Message::RegisterResponse { .. })
    }
}

/// Wire size of a message in bytes.
///
/// A fixed 32-byte header, plus 8 bytes per real value, 8 bytes per
/// integer field (booleans, enum tags and optional integers included) and
/// the UTF-8 length of each text field. Per variant:
///
/// | variant | integers | reals | text |
/// |---|---|---|---|
/// | RegisterRequest | role fields | - | device id, token, kind name |
/// | RegisterResponse | admitted | - | reason |
/// | NavigationInstruction | - | x, y, z | device id |
/// | NeuronConfig | layer, neuron, activation | weights, bias | - |
/// | ForwardActivation | sample, layer, neuron | value | - |
/// | SparseMask | sample, layer, each index | - | - |
/// | InputVector / OutputVector | sample | values | - |
/// | LossReport | epoch, sample | loss, deltas | - |
/// | BackwardDelta | sample, layer, neuron | delta | - |
/// | GradientReport | layer, neuron, sample | grads, bias grad | - |
/// | GradientBatch | sample, layer, one per entry | grads, bias grad per entry | - |
/// | WeightUpdate | layer, neuron | weights, bias | - |
/// | NeuronAck | layer, neuron, sample | - | - |
/// | ShardAck | layer, start, end, sample | - | - |
/// | EpochBarrier | epoch | - | - |
/// | SampleRelease | epoch, sample | - | - |
///
/// Each role in a `RegisterRequest` costs a tag integer plus its own
/// integers (controller: layer, start, end; host: layer, count, indices).
pub fn message_size(message: &Message) -> usize {
    let (ints, reals, text) = match message {
        Message::RegisterRequest { device_id, roles, auth_token, device_kind } => (
            roles.iter().map(Role::integer_fields).sum(),
            0,
            device_id.as_str().len() + auth_token.len() + device_kind.name().len(),
        ),
        Message::RegisterResponse { reason, .. } => (1, 0, reason.len()),
        Message::NavigationInstruction { device_id, .. } => (0, 3, device_id.as_str().len()),
        Message::NeuronConfig { incoming_weights, .. } => (3, incoming_weights.len() + 1, 0),
        Message::ForwardActivation { .. } => (3, 1, 0),
        Message::SparseMask { suppressed, .. } => (2 + suppressed.len(), 0, 0),
        Message::InputVector { values, .. } | Message::OutputVector { values, .. } => (1, values.len(), 0),
        Message::LossReport { output_delta_vector, .. } => (2, 1 + output_delta_vector.len(), 0),
        Message::BackwardDelta { .. } => (3, 1, 0),
        Message::GradientReport { weight_grads, .. } => (3, weight_grads.len() + 1, 0),
        Message::GradientBatch { gradients, .. } => (
            2 + gradients.len(),
            gradients.iter().map(|g| g.weight_grads.len() + 1).sum(),
            0,
        ),
        Message::WeightUpdate { new_weights, .. } => (2, new_weights.len() + 1, 0),
        Message::NeuronAck { .. } => (3, 0, 0),
        Message::ShardAck { .. } => (4, 0, 0),
        Message::EpochBarrier { .. } => (1, 0, 0),
        Message::SampleRelease { .. } => (2, 0, 0),
    };
    HEADER_BYTES + INT_BYTES * ints + REAL_BYTES * reals + text
}

/// A message in flight between two devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub src: DeviceId,
    pub dst: DeviceId,
    /// Receiving neuron on `dst`, for neuron-addressed data messages.
    pub port: Option<usize>,
    pub send_time: f64,
    pub deliver_time: f64,
    pub payload: Message,
    pub size_bytes: usize,
}

impl Envelope {
    pub fn new(src: DeviceId, dst: DeviceId, port: Option<usize>, send_time: f64, deliver_time: f64, payload: Message) -> Self {
        let size_bytes = message_size(&payload);
        Envelope { src, dst, port, send_time, deliver_time, payload, size_bytes }
    }
}
