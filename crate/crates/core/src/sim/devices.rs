use std::collections::{BTreeMap, BTreeSet};

use super::experiment::Preprocessor;
use super::SimError;
use crate::nn::{
    activate, activate_scalar, activation_derivative, compute_loss, mean_loss, optimizer_step, output_delta,
    weighted_sum, ActivationKind, AdamState, GradientSet, NetworkSpec, ParameterSet, Sample,
};
use crate::protocol::{AdmissionRegistry, DeviceId, Envelope, Message, NeuronGradient, NeuronRange, RegisterRequest};
use crate::topology::{Assignment, FormationPlan};

/// Read-only facts every device may consult.
pub(crate) struct Context<'a> {
    pub spec: &'a NetworkSpec,
    pub assignment: &'a Assignment,
    pub plan: &'a FormationPlan,
    pub sparse: bool,
    pub samples_per_epoch: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Outgoing {
    pub dst: DeviceId,
    pub port: Option<usize>,
    pub payload: Message,
}

fn send(dst: &DeviceId, port: Option<usize>, payload: Message) -> Outgoing {
    Outgoing { dst: dst.clone(), port, payload }
}

fn invariant(msg: impl Into<String>) -> SimError {
    SimError::Invariant(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MasterPhase {
    Registering,
    Configuring,
    Training,
    Done,
}

pub(crate) struct MasterState {
    pub id: DeviceId,
    pub registry: AdmissionRegistry,
    pub token: String,
    pub params: ParameterSet,
    pub adam: Option<AdamState>,
    pub phase: MasterPhase,
    pub epoch_losses: Vec<f64>,
    epoch: usize,
    index: usize,
    losses: Vec<f64>,
    pending_loss: Option<f64>,
    pending_grads: GradientSet,
    reported: BTreeSet<(usize, usize)>,
    awaiting_shards: BTreeSet<(usize, NeuronRange)>,
}

impl MasterState {
    pub fn new(id: DeviceId, registry: AdmissionRegistry, token: String, spec: &NetworkSpec, params: ParameterSet) -> Self {
        let adam = spec.optimizer.init_state(&params);
        MasterState {
            id,
            registry,
            token,
            params,
            adam,
            phase: MasterPhase::Registering,
            epoch_losses: Vec::new(),
            epoch: 0,
            index: 0,
            losses: Vec::new(),
            pending_loss: None,
            pending_grads: GradientSet::zeros(spec),
            reported: BTreeSet::new(),
            awaiting_shards: BTreeSet::new(),
        }
    }

    fn sample_id(&self, ctx: &Context) -> u64 {
        (self.epoch * ctx.samples_per_epoch + self.index) as u64
    }

    fn all_shards(ctx: &Context) -> BTreeSet<(usize, NeuronRange)> {
        ctx.assignment.controllers.iter().map(|c| (c.layer, c.neurons)).collect()
    }

    pub fn handle(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        match &env.payload {
            Message::RegisterRequest { .. } => self.on_register(ctx, env),
            Message::ShardAck { layer_index, neurons, sample_id } => self.on_shard_ack(ctx, *layer_index, *neurons, *sample_id),
            Message::LossReport { sample_id, loss_value, .. } => {
                self.expect_training(ctx, *sample_id, "LossReport")?;
                if self.pending_loss.replace(*loss_value).is_some() {
                    return Err(invariant(format!("duplicate loss report for sample {sample_id}")));
                }
                self.maybe_step(ctx)
            }
            Message::GradientBatch { sample_id, layer_index, gradients } => {
                self.expect_training(ctx, *sample_id, "GradientBatch")?;
                self.on_gradients(ctx, *layer_index, gradients)
            }
            other => Err(invariant(format!("master cannot handle {}", other.variant()))),
        }
    }

    fn expect_training(&self, ctx: &Context, sample_id: u64, what: &str) -> Result<(), SimError> {
        if self.phase != MasterPhase::Training || sample_id != self.sample_id(ctx) {
            return Err(invariant(format!("{what} for sample {sample_id} outside its training step")));
        }
        Ok(())
    }

    fn on_register(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        let request = RegisterRequest::from_message(&env.payload).expect("caller matched RegisterRequest");
        let response = self.registry.verify_registration(&request, &self.token, ctx.spec);
        let mut out = vec![send(&env.src, None, response.into_message())];
        let complete = ctx.assignment.devices().all(|d| self.registry.is_admitted(d));
        if self.phase == MasterPhase::Registering && complete && self.registry.coverage_gaps(ctx.spec).is_empty() {
            self.phase = MasterPhase::Configuring;
            for (device, position) in &ctx.plan.positions {
                if device != &self.id {
                    out.push(send(
                        device,
                        None,
                        Message::NavigationInstruction { device_id: device.clone(), position: *position },
                    ));
                }
            }
            for layer in 1..ctx.spec.layer_count() {
                let p = self.params.layer(layer);
                for neuron in 0..ctx.spec.layer_sizes[layer] {
                    out.push(send(
                        &ctx.assignment.controller_of(layer, neuron).device,
                        None,
                        Message::NeuronConfig {
                            layer_index: layer,
                            neuron_index: neuron,
                            incoming_weights: p.weights[neuron].clone(),
                            bias: p.biases[neuron],
                            activation: ctx.spec.activation(layer),
                        },
                    ));
                }
            }
            self.awaiting_shards = Self::all_shards(ctx);
        }
        Ok(out)
    }

    fn on_shard_ack(
        &mut self,
        ctx: &Context,
        layer: usize,
        neurons: NeuronRange,
        sample_id: Option<u64>,
    ) -> Result<Vec<Outgoing>, SimError> {
        let expected = match self.phase {
            MasterPhase::Configuring => sample_id.is_none(),
            MasterPhase::Training => sample_id == Some(self.sample_id(ctx)) && self.pending_loss.is_none(),
            _ => false,
        };
        if !expected || !self.awaiting_shards.remove(&(layer, neurons)) {
            return Err(invariant(format!("unexpected ShardAck for layer {layer} sample {sample_id:?}")));
        }
        if !self.awaiting_shards.is_empty() {
            return Ok(Vec::new());
        }
        if self.phase == MasterPhase::Configuring {
            self.phase = MasterPhase::Training;
            return Ok(self.start_epoch(ctx, 0));
        }
        self.index += 1;
        if self.index < ctx.samples_per_epoch {
            return Ok(vec![self.release(ctx)]);
        }
        self.epoch_losses.push(mean_loss(&self.losses));
        self.losses.clear();
        Ok(self.start_epoch(ctx, self.epoch + 1))
    }

    fn start_epoch(&mut self, ctx: &Context, epoch: usize) -> Vec<Outgoing> {
        if epoch >= ctx.spec.epochs || ctx.samples_per_epoch == 0 {
            self.phase = MasterPhase::Done;
            return Vec::new();
        }
        self.epoch = epoch;
        self.index = 0;
        let barrier = Message::EpochBarrier { epoch };
        vec![
            send(&ctx.assignment.input_provider, None, barrier.clone()),
            send(&ctx.assignment.output_receiver, None, barrier),
            self.release(ctx),
        ]
    }

    fn release(&self, ctx: &Context) -> Outgoing {
        send(
            &ctx.assignment.input_provider,
            None,
            Message::SampleRelease { epoch: self.epoch, sample_id: self.sample_id(ctx) },
        )
    }

    fn on_gradients(&mut self, ctx: &Context, layer: usize, gradients: &[NeuronGradient]) -> Result<Vec<Outgoing>, SimError> {
        if layer == 0 || layer >= ctx.spec.layer_count() {
            return Err(invariant(format!("gradient batch for layer {layer}")));
        }
        let fan_in = ctx.spec.layer_sizes[layer - 1];
        let target = &mut self.pending_grads.layers[layer - 1];
        for g in gradients {
            if g.neuron_index >= target.biases.len() || g.weight_grads.len() != fan_in {
                return Err(invariant(format!("malformed gradient for neuron {layer}:{}", g.neuron_index)));
            }
            if !self.reported.insert((layer, g.neuron_index)) {
                return Err(invariant(format!("duplicate gradient for neuron {layer}:{}", g.neuron_index)));
            }
            target.weights[g.neuron_index].clone_from(&g.weight_grads);
            target.biases[g.neuron_index] = g.bias_grad;
        }
        self.maybe_step(ctx)
    }

    /// Applies the optimizer once the loss and every gradient of the
    /// current sample are in, then fans out the new weights.
    fn maybe_step(&mut self, ctx: &Context) -> Result<Vec<Outgoing>, SimError> {
        if self.pending_loss.is_none() || self.reported.len() < ctx.spec.trainable_neurons() {
            return Ok(Vec::new());
        }
        let next = optimizer_step(&ctx.spec.optimizer, self.adam.as_mut(), &self.params, &self.pending_grads)?;
        self.params = next;
        self.losses.push(self.pending_loss.take().expect("checked above"));
        self.reported.clear();
        let mut out = Vec::new();
        for layer in 1..ctx.spec.layer_count() {
            let p = self.params.layer(layer);
            for neuron in 0..ctx.spec.layer_sizes[layer] {
                out.push(send(
                    &ctx.assignment.controller_of(layer, neuron).device,
                    None,
                    Message::WeightUpdate {
                        layer_index: layer,
                        neuron_index: neuron,
                        new_weights: p.weights[neuron].clone(),
                        new_bias: p.biases[neuron],
                    },
                ));
            }
        }
        self.awaiting_shards = Self::all_shards(ctx);
        Ok(out)
    }
}

/// Relays configuration and weights to its shard and aggregates replies.
pub(crate) struct ControllerState {
    pub layer: usize,
    pub neurons: NeuronRange,
    master: DeviceId,
    hosts: BTreeMap<usize, DeviceId>,
    acks: BTreeMap<Option<u64>, BTreeSet<usize>>,
    gradients: BTreeMap<u64, BTreeMap<usize, NeuronGradient>>,
}

impl ControllerState {
    pub fn new(ctx: &Context, layer: usize, neurons: NeuronRange) -> Self {
        let hosts = neurons.iter().map(|n| (n, ctx.assignment.host_of(layer, n).clone())).collect();
        ControllerState {
            layer,
            neurons,
            master: ctx.assignment.master.clone(),
            hosts,
            acks: BTreeMap::new(),
            gradients: BTreeMap::new(),
        }
    }

    pub fn owns(&self, layer: usize, neuron: usize) -> bool {
        layer == self.layer && self.neurons.contains(neuron)
    }

    pub fn handle(&mut self, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        match &env.payload {
            Message::NeuronConfig { neuron_index, .. } | Message::WeightUpdate { neuron_index, .. } => {
                let host = &self.hosts[neuron_index];
                Ok(vec![send(host, None, env.payload.clone())])
            }
            Message::NeuronAck { neuron_index, sample_id, .. } => {
                let acked = self.acks.entry(*sample_id).or_default();
                if !acked.insert(*neuron_index) {
                    return Err(invariant(format!("duplicate ack from neuron {}:{neuron_index}", self.layer)));
                }
                if acked.len() < self.neurons.len() {
                    return Ok(Vec::new());
                }
                self.acks.remove(sample_id);
                let ack = Message::ShardAck { layer_index: self.layer, neurons: self.neurons, sample_id: *sample_id };
                Ok(vec![send(&self.master, None, ack)])
            }
            Message::GradientReport { neuron_index, weight_grads, bias_grad, sample_id, .. } => {
                let batch = self.gradients.entry(*sample_id).or_default();
                let gradient =
                    NeuronGradient { neuron_index: *neuron_index, weight_grads: weight_grads.clone(), bias_grad: *bias_grad };
                if batch.insert(*neuron_index, gradient).is_some() {
                    return Err(invariant(format!("duplicate gradient report from {}:{neuron_index}", self.layer)));
                }
                if batch.len() < self.neurons.len() {
                    return Ok(Vec::new());
                }
                let gradients = self.gradients.remove(sample_id).expect("present").into_values().collect();
                let batch = Message::GradientBatch { sample_id: *sample_id, layer_index: self.layer, gradients };
                Ok(vec![send(&self.master, None, batch)])
            }
            other => Err(invariant(format!("controller cannot handle {}", other.variant()))),
        }
    }
}

#[derive(Debug, Clone)]
struct HostedNeuron {
    weights: Vec<f64>,
    bias: f64,
    activation: ActivationKind,
    configured: bool,
}

/// Per-sample working state of one hosting device.
#[derive(Debug, Default)]
struct SampleState {
    inputs: BTreeMap<usize, Vec<Option<f64>>>,
    fired: BTreeMap<usize, (f64, f64)>,
    suppressed: Vec<usize>,
    contributions: BTreeMap<usize, Vec<Option<f64>>>,
    finished: BTreeSet<usize>,
}

/// Hosts one or more neurons of a single layer.
pub(crate) struct HostState {
    layer: usize,
    neurons: BTreeMap<usize, HostedNeuron>,
    samples: BTreeMap<u64, SampleState>,
    awaiting_update: BTreeMap<usize, u64>,
}

impl HostState {
    pub fn new(layer: usize, hosted: &[usize]) -> Self {
        let neurons = hosted
            .iter()
            .map(|&n| (n, HostedNeuron { weights: Vec::new(), bias: 0.0, activation: ActivationKind::Identity, configured: false }))
            .collect();
        HostState { layer, neurons, samples: BTreeMap::new(), awaiting_update: BTreeMap::new() }
    }

    fn neuron_mut(&mut self, neuron: usize) -> Result<&mut HostedNeuron, SimError> {
        let layer = self.layer;
        self.neurons.get_mut(&neuron).ok_or_else(|| invariant(format!("neuron {layer}:{neuron} is not hosted here")))
    }

    fn port(&self, env: &Envelope) -> Result<usize, SimError> {
        match env.port {
            Some(p) if self.neurons.contains_key(&p) => Ok(p),
            other => Err(invariant(format!("{} to port {other:?} on layer {}", env.payload.variant(), self.layer))),
        }
    }

    pub fn handle(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        match &env.payload {
            Message::NeuronConfig { layer_index, neuron_index, incoming_weights, bias, activation } => {
                self.check_layer(*layer_index)?;
                if incoming_weights.len() != ctx.spec.layer_sizes[self.layer - 1] {
                    return Err(invariant(format!("config for {layer_index}:{neuron_index} has wrong fan-in")));
                }
                let n = self.neuron_mut(*neuron_index)?;
                *n = HostedNeuron { weights: incoming_weights.clone(), bias: *bias, activation: *activation, configured: true };
                Ok(vec![self.ack(env, *neuron_index, None)])
            }
            Message::WeightUpdate { layer_index, neuron_index, new_weights, new_bias } => {
                self.check_layer(*layer_index)?;
                let sample = self
                    .awaiting_update
                    .remove(neuron_index)
                    .ok_or_else(|| invariant(format!("weight update for {layer_index}:{neuron_index} without a pending sample")))?;
                let n = self.neuron_mut(*neuron_index)?;
                if new_weights.len() != n.weights.len() {
                    return Err(invariant(format!("weight update for {layer_index}:{neuron_index} has wrong fan-in")));
                }
                n.weights.clone_from(new_weights);
                n.bias = *new_bias;
                if !self.awaiting_update.values().any(|s| *s == sample) {
                    self.samples.remove(&sample);
                }
                Ok(vec![self.ack(env, *neuron_index, Some(sample))])
            }
            Message::InputVector { sample_id, values } => {
                if self.layer != 0 {
                    return Err(invariant("input vector sent past the input layer"));
                }
                let port = self.port(env)?;
                let &[value] = values.as_slice() else {
                    return Err(invariant(format!("input for neuron {port} carries {} values", values.len())));
                };
                self.fire(ctx, *sample_id, port, value, value)
            }
            Message::ForwardActivation { sample_id, layer_index, neuron_index, value } => {
                self.check_layer(layer_index + 1)?;
                let port = self.port(env)?;
                let inputs = self.inputs_for(ctx, *sample_id, port);
                match inputs.get_mut(*neuron_index) {
                    Some(slot @ None) => *slot = Some(*value),
                    _ => return Err(invariant(format!("unexpected activation {layer_index}:{neuron_index} for sample {sample_id}"))),
                }
                self.try_fire(ctx, *sample_id, &[port])
            }
            Message::SparseMask { sample_id, layer_index, suppressed } => {
                self.check_layer(layer_index + 1)?;
                let hosted: Vec<usize> = self.neurons.keys().copied().collect();
                for &port in &hosted {
                    let inputs = self.inputs_for(ctx, *sample_id, port);
                    for &i in suppressed {
                        match inputs.get_mut(i) {
                            Some(slot @ None) => *slot = Some(0.0),
                            _ => return Err(invariant(format!("mask conflicts with input {layer_index}:{i}"))),
                        }
                    }
                }
                self.try_fire(ctx, *sample_id, &hosted)
            }
            Message::BackwardDelta { sample_id, layer_index, neuron_index, delta_value } => {
                let port = self.port(env)?;
                if self.layer == ctx.spec.output_layer() {
                    if *layer_index != self.layer || *neuron_index != port {
                        return Err(invariant("output delta addressed to the wrong neuron"));
                    }
                    return self.backward(ctx, *sample_id, port, *delta_value);
                }
                self.check_layer(layer_index - 1)?;
                let width = ctx.spec.layer_sizes[self.layer + 1];
                let state = self.samples.entry(*sample_id).or_default();
                let slots = state.contributions.entry(port).or_insert_with(|| vec![None; width]);
                match slots.get_mut(*neuron_index) {
                    Some(slot @ None) => *slot = Some(*delta_value),
                    _ => return Err(invariant(format!("unexpected delta from {layer_index}:{neuron_index}"))),
                }
                if slots.iter().any(Option::is_none) {
                    return Ok(Vec::new());
                }
                // ascending downstream order, as in the reference backward pass
                let mut acc = 0.0;
                for c in slots.iter().flatten() {
                    acc += c;
                }
                if self.layer == 0 {
                    state.finished.insert(port);
                    if state.finished.len() == self.neurons.len() {
                        self.samples.remove(sample_id);
                    }
                    return Ok(Vec::new());
                }
                let &(z, a) = state
                    .fired
                    .get(&port)
                    .ok_or_else(|| invariant(format!("delta for neuron {}:{port} before it fired", self.layer)))?;
                let d = activation_derivative(ctx.spec.activation(self.layer), &[z], &[a])?[0];
                self.backward(ctx, *sample_id, port, acc * d)
            }
            other => Err(invariant(format!("neuron host cannot handle {}", other.variant()))),
        }
    }

    fn check_layer(&self, layer: usize) -> Result<(), SimError> {
        if layer != self.layer {
            return Err(invariant(format!("layer {layer} message reached a layer {} host", self.layer)));
        }
        Ok(())
    }

    fn ack(&self, env: &Envelope, neuron: usize, sample_id: Option<u64>) -> Outgoing {
        send(&env.src, None, Message::NeuronAck { layer_index: self.layer, neuron_index: neuron, sample_id })
    }

    fn inputs_for(&mut self, ctx: &Context, sample_id: u64, port: usize) -> &mut Vec<Option<f64>> {
        let width = ctx.spec.layer_sizes[self.layer - 1];
        self.samples.entry(sample_id).or_default().inputs.entry(port).or_insert_with(|| vec![None; width])
    }

    fn try_fire(&mut self, ctx: &Context, sample_id: u64, ports: &[usize]) -> Result<Vec<Outgoing>, SimError> {
        let mut out = Vec::new();
        for &port in ports {
            let state = self.samples.entry(sample_id).or_default();
            if state.fired.contains_key(&port) {
                continue;
            }
            let Some(inputs) = state.inputs.get(&port) else { continue };
            let Some(x) = inputs.iter().copied().collect::<Option<Vec<f64>>>() else { continue };
            let n = &self.neurons[&port];
            if !n.configured {
                return Err(invariant(format!("neuron {}:{port} fired before configuration", self.layer)));
            }
            let z = weighted_sum(&n.weights, &x, n.bias)?;
            let local = if n.activation == ActivationKind::Softmax { ActivationKind::Identity } else { n.activation };
            let a = activate_scalar(local, z)?;
            out.extend(self.fire(ctx, sample_id, port, z, a)?);
        }
        Ok(out)
    }

    fn fire(&mut self, ctx: &Context, sample_id: u64, neuron: usize, z: f64, a: f64) -> Result<Vec<Outgoing>, SimError> {
        let layer = self.layer;
        let state = self.samples.entry(sample_id).or_default();
        if state.fired.insert(neuron, (z, a)).is_some() {
            return Err(invariant(format!("neuron {layer}:{neuron} fired twice for sample {sample_id}")));
        }
        let mut out = Vec::new();
        if layer == ctx.spec.output_layer() {
            out.push(send(&ctx.assignment.output_receiver, Some(neuron), Message::OutputVector { sample_id, values: vec![z, a] }));
            return Ok(out);
        }
        let next = layer + 1;
        if ctx.sparse && a.to_bits() == 0 {
            state.suppressed.push(neuron);
        } else {
            for k in 0..ctx.spec.layer_sizes[next] {
                let msg = Message::ForwardActivation { sample_id, layer_index: layer, neuron_index: neuron, value: a };
                out.push(send(ctx.assignment.host_of(next, k), Some(k), msg));
            }
        }
        if state.fired.len() == self.neurons.len() && !state.suppressed.is_empty() {
            let mut suppressed = state.suppressed.clone();
            suppressed.sort_unstable();
            for device in &ctx.assignment.layer_devices[next] {
                let mask = Message::SparseMask { sample_id, layer_index: layer, suppressed: suppressed.clone() };
                out.push(send(device, None, mask));
            }
        }
        Ok(out)
    }

    /// Emits the gradient and upstream contributions of `neuron`, whose
    /// delta is now final.
    fn backward(&mut self, ctx: &Context, sample_id: u64, neuron: usize, delta: f64) -> Result<Vec<Outgoing>, SimError> {
        let layer = self.layer;
        let state = self.samples.entry(sample_id).or_default();
        if !state.finished.insert(neuron) {
            return Err(invariant(format!("neuron {layer}:{neuron} received its delta twice")));
        }
        let x: Vec<f64> = state
            .inputs
            .get(&neuron)
            .map(|v| v.iter().map(|i| i.unwrap_or(0.0)).collect())
            .ok_or_else(|| invariant(format!("no cached inputs for {layer}:{neuron}")))?;
        let n = &self.neurons[&neuron];
        let mut out = Vec::with_capacity(x.len() + 1);
        for (i, w) in n.weights.iter().enumerate() {
            let msg = Message::BackwardDelta { sample_id, layer_index: layer, neuron_index: neuron, delta_value: w * delta };
            out.push(send(ctx.assignment.host_of(layer - 1, i), Some(i), msg));
        }
        let report = Message::GradientReport {
            layer_index: layer,
            neuron_index: neuron,
            weight_grads: x.iter().map(|xi| delta * xi).collect(),
            bias_grad: delta,
            sample_id,
        };
        out.push(send(&ctx.assignment.controller_of(layer, neuron).device, None, report));
        if self.awaiting_update.insert(neuron, sample_id).is_some() {
            return Err(invariant(format!("neuron {layer}:{neuron} still awaits a weight update")));
        }
        Ok(out)
    }
}

pub(crate) struct InputProviderState {
    dataset: Vec<Sample>,
    preprocessor: Preprocessor,
    epoch: Option<usize>,
}

impl InputProviderState {
    pub fn new(dataset: Vec<Sample>, preprocessor: Preprocessor) -> Self {
        InputProviderState { dataset, preprocessor, epoch: None }
    }

    pub fn handle(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        match env.payload {
            Message::EpochBarrier { epoch } => {
                self.epoch = Some(epoch);
                Ok(Vec::new())
            }
            Message::SampleRelease { epoch, sample_id } => {
                if self.epoch != Some(epoch) {
                    return Err(invariant(format!("sample {sample_id} released outside epoch {epoch}")));
                }
                let index = usize::try_from(sample_id).unwrap_or(usize::MAX) % self.dataset.len().max(1);
                let sample = self.dataset.get(index).ok_or_else(|| invariant("release on an empty dataset"))?;
                let input = self.preprocessor.apply(&sample.input);
                Ok(input
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        send(ctx.assignment.host_of(0, i), Some(i), Message::InputVector { sample_id, values: vec![v] })
                    })
                    .collect())
            }
            ref other => Err(invariant(format!("input provider cannot handle {}", other.variant()))),
        }
    }
}

pub(crate) struct OutputReceiverState {
    targets: Vec<Vec<f64>>,
    epoch: Option<usize>,
    pending: BTreeMap<u64, Vec<Option<(f64, f64)>>>,
}

impl OutputReceiverState {
    pub fn new(dataset: &[Sample]) -> Self {
        OutputReceiverState { targets: dataset.iter().map(|s| s.target.clone()).collect(), epoch: None, pending: BTreeMap::new() }
    }

    pub fn handle(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        match &env.payload {
            Message::EpochBarrier { epoch } => {
                self.epoch = Some(*epoch);
                Ok(Vec::new())
            }
            Message::OutputVector { sample_id, values } => {
                let width = ctx.spec.output_size();
                let port = env.port.filter(|p| *p < width).ok_or_else(|| invariant("output on an invalid port"))?;
                let &[z, a] = values.as_slice() else {
                    return Err(invariant("output vector must carry (z, a)"));
                };
                let slots = self.pending.entry(*sample_id).or_insert_with(|| vec![None; width]);
                if slots[port].replace((z, a)).is_some() {
                    return Err(invariant(format!("duplicate output {port} for sample {sample_id}")));
                }
                if slots.iter().any(Option::is_none) {
                    return Ok(Vec::new());
                }
                let (z, a): (Vec<f64>, Vec<f64>) = self.pending.remove(sample_id).expect("present").into_iter().flatten().unzip();
                self.score(ctx, *sample_id, &z, a)
            }
            other => Err(invariant(format!("output receiver cannot handle {}", other.variant()))),
        }
    }

    fn score(&self, ctx: &Context, sample_id: u64, z: &[f64], a: Vec<f64>) -> Result<Vec<Outgoing>, SimError> {
        let epoch = self.epoch.ok_or_else(|| invariant("output before any epoch barrier"))?;
        let index = usize::try_from(sample_id).unwrap_or(usize::MAX) % self.targets.len().max(1);
        let target = self.targets.get(index).ok_or_else(|| invariant("no target for sample"))?;
        let activation = ctx.spec.output_activation();
        let prediction = if activation == ActivationKind::Softmax { activate(activation, z)? } else { a };
        let loss_value = compute_loss(ctx.spec.loss, &prediction, target)?;
        let delta = output_delta(ctx.spec.loss, activation, &prediction, z, target)?;
        let layer = ctx.spec.output_layer();
        let mut out = vec![send(
            &ctx.assignment.master,
            None,
            Message::LossReport { epoch, sample_id, loss_value, output_delta_vector: delta.clone() },
        )];
        for (j, d) in delta.into_iter().enumerate() {
            let msg = Message::BackwardDelta { sample_id, layer_index: layer, neuron_index: j, delta_value: d };
            out.push(send(ctx.assignment.host_of(layer, j), Some(j), msg));
        }
        Ok(out)
    }
}
