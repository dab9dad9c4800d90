//! Deterministic discrete-event execution of the device state machines.
//!
//! One event is processed at a time in `(time, sequence)` order. Devices
//! only react to deliveries and never share state; device computation takes
//! zero simulated time, so only link latency advances the clock. Each
//! sample runs forward, loss, backward, optimizer step and weight fan-out to
//! completion before the master releases the next one.

mod devices;
mod experiment;
mod queue;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::summarize_records;
use crate::nn::{init_parameters, NnError, ParameterSet};
use crate::protocol::{
    AdmissionRegistry, AdmissionStatus, DeviceId, Envelope, Message, ProtocolErrorEvent, RegisterRequest, TraceLog,
    TraceRecord,
};
use crate::topology::{
    assign_neurons_sharded, check_connectivity, link_latency, plan_formation, Assignment, ConnectivityViolation,
    FormationPlan, Position, TopologyError,
};
use devices::{
    Context, ControllerState, HostState, InputProviderState, MasterPhase, MasterState, Outgoing, OutputReceiverState,
};

pub use experiment::{preprocess, Experiment, Preprocessing, Preprocessor, RogueInjection};
pub use queue::{EventQueue, SimEvent};

/// Reason recorded when the network drops traffic from a device the master
/// has not admitted.
pub const REASON_UNADMITTED_SENDER: &str = "unadmitted_sender";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{} required links are out of range", .0.len())]
    Connectivity(Vec<ConnectivityViolation>),
    #[error("registration failed for {}", describe_rejections(.0))]
    Admission(Vec<(DeviceId, String)>),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("simulation stalled: {0}")]
    Stalled(String),
}

fn describe_rejections(list: &[(DeviceId, String)]) -> String {
    list.iter().map(|(d, r)| format!("{d} ({r})")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epoch_losses: Vec<f64>,
    /// Simulated seconds from the first input of each epoch to its last
    /// weight-update acknowledgment.
    pub epoch_makespans: Vec<f64>,
    pub message_counts: BTreeMap<String, usize>,
    pub final_params: ParameterSet,
    pub trace_hash: String,
    pub device_count: usize,
    pub protocol_errors: usize,
    pub finish_time: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub report: TrainingReport,
    pub trace: Vec<TraceRecord>,
    pub assignment: Assignment,
    pub plan: FormationPlan,
}

#[derive(Default)]
struct Device {
    master: Option<MasterState>,
    host: Option<HostState>,
    controllers: Vec<ControllerState>,
    input_provider: Option<InputProviderState>,
    output_receiver: Option<OutputReceiverState>,
    admitted: Option<bool>,
    position: Option<Position>,
}

impl Device {
    fn dispatch(&mut self, ctx: &Context, env: &Envelope) -> Result<Vec<Outgoing>, SimError> {
        let missing = || SimError::Invariant(format!("{} has no role for {}", env.dst, env.payload.variant()));
        match &env.payload {
            Message::RegisterRequest { .. }
            | Message::ShardAck { .. }
            | Message::LossReport { .. }
            | Message::GradientBatch { .. } => self.master.as_mut().ok_or_else(missing)?.handle(ctx, env),
            Message::RegisterResponse { admitted, .. } => {
                self.admitted = Some(*admitted);
                Ok(Vec::new())
            }
            Message::NavigationInstruction { position, .. } => {
                self.position = Some(*position);
                Ok(Vec::new())
            }
            // the master talks to controllers, controllers talk to hosts
            Message::NeuronConfig { .. } | Message::WeightUpdate { .. } if env.src != ctx.assignment.master => {
                self.host.as_mut().ok_or_else(missing)?.handle(ctx, env)
            }
            Message::NeuronConfig { layer_index, neuron_index, .. }
            | Message::WeightUpdate { layer_index, neuron_index, .. }
            | Message::NeuronAck { layer_index, neuron_index, .. }
            | Message::GradientReport { layer_index, neuron_index, .. } => self
                .controllers
                .iter_mut()
                .find(|c| c.owns(*layer_index, *neuron_index))
                .ok_or_else(missing)?
                .handle(env),
            Message::InputVector { .. }
            | Message::ForwardActivation { .. }
            | Message::SparseMask { .. }
            | Message::BackwardDelta { .. } => self.host.as_mut().ok_or_else(missing)?.handle(ctx, env),
            Message::OutputVector { .. } => self.output_receiver.as_mut().ok_or_else(missing)?.handle(ctx, env),
            Message::SampleRelease { .. } => self.input_provider.as_mut().ok_or_else(missing)?.handle(ctx, env),
            Message::EpochBarrier { .. } => {
                let mut out = Vec::new();
                if self.input_provider.is_none() && self.output_receiver.is_none() {
                    return Err(missing());
                }
                if let Some(ip) = self.input_provider.as_mut() {
                    out.extend(ip.handle(ctx, env)?);
                }
                if let Some(or) = self.output_receiver.as_mut() {
                    out.extend(or.handle(ctx, env)?);
                }
                Ok(out)
            }
        }
    }
}

/// Links, clock and trace.
struct Network<'a> {
    plan: &'a FormationPlan,
    queue: EventQueue,
    last_delivery: HashMap<(DeviceId, DeviceId), f64>,
    trace: TraceLog,
}

impl Network<'_> {
    /// Delay of one hop. A device outside the plan is treated as flying at
    /// its peer's position.
    fn hop_latency(&self, src: &DeviceId, dst: &DeviceId, size: usize) -> Result<f64, SimError> {
        if src == dst {
            return Ok(0.0);
        }
        let (ps, pd) = match (self.plan.positions.get(src), self.plan.positions.get(dst)) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) | (None, Some(a)) => (a, a),
            (None, None) => return Err(TopologyError::UnknownDevice(dst.clone()).into()),
        };
        link_latency(&self.plan.link_mode, ps, pd, size).map_err(|e| match e {
            TopologyError::OutOfRange { distance_m, range_m } => {
                TopologyError::Disconnected { src: src.clone(), dst: dst.clone(), distance_m, range_m }.into()
            }
            other => other.into(),
        })
    }

    /// Sends in FIFO order per directed link.
    fn send(&mut self, src: &DeviceId, now: f64, out: Outgoing) -> Result<(), SimError> {
        let mut env = Envelope::new(src.clone(), out.dst, out.port, now, now, out.payload);
        let arrival = now + self.hop_latency(&env.src, &env.dst, env.size_bytes)?;
        let last = self.last_delivery.entry((env.src.clone(), env.dst.clone())).or_insert(f64::NEG_INFINITY);
        env.deliver_time = arrival.max(*last);
        *last = env.deliver_time;
        self.queue.push(env);
        Ok(())
    }
}

/// Runs one experiment end to end.
pub fn run_simulation(experiment: &Experiment) -> Result<SimulationOutcome, SimError> {
    let errors = experiment.validate();
    if !errors.is_empty() {
        return Err(SimError::Config(errors));
    }
    let spec = &experiment.spec;
    let assignment = assign_neurons_sharded(spec, experiment.design, experiment.controllers_per_layer);
    let plan = plan_formation(&assignment, spec, &experiment.formation, experiment.link);
    check_connectivity(&plan, &assignment, spec).map_err(SimError::Connectivity)?;
    let ctx = Context {
        spec,
        assignment: &assignment,
        plan: &plan,
        sparse: experiment.sparse_forwarding,
        samples_per_epoch: experiment.dataset.len(),
    };

    let mut devices: BTreeMap<DeviceId, Device> = assignment.devices().map(|d| (d.clone(), Device::default())).collect();
    let master_id = assignment.master.clone();
    let registry = AdmissionRegistry::with_master(master_id.clone(), assignment.fleet[&master_id]);
    let master = MasterState::new(master_id.clone(), registry, experiment.auth_token.clone(), spec, init_parameters(spec));
    device(&mut devices, &master_id).master = Some(master);
    for (layer, row) in assignment.layer_devices.iter().enumerate() {
        for d in row {
            if let Some((l, neurons)) = assignment.hosted_neurons(d) {
                debug_assert_eq!(l, layer);
                device(&mut devices, d).host = Some(HostState::new(layer, &neurons));
            }
        }
    }
    for shard in &assignment.controllers {
        let state = ControllerState::new(&ctx, shard.layer, shard.neurons);
        device(&mut devices, &shard.device).controllers.push(state);
    }
    let preprocessor = Preprocessor::fit(experiment.preprocessing, &experiment.dataset);
    device(&mut devices, &assignment.input_provider).input_provider =
        Some(InputProviderState::new(experiment.dataset.clone(), preprocessor));
    device(&mut devices, &assignment.output_receiver).output_receiver =
        Some(OutputReceiverState::new(&experiment.dataset));

    let mut net = Network { plan: &plan, queue: EventQueue::new(), last_delivery: HashMap::new(), trace: TraceLog::new() };
    for r in &experiment.rogue {
        let mut env = Envelope::new(r.src.clone(), r.dst.clone(), r.port, r.time, r.time, r.message.clone());
        env.deliver_time = r.time + net.hop_latency(&r.src, &r.dst, env.size_bytes)?;
        net.queue.push(env);
    }
    for d in assignment.devices().filter(|d| **d != master_id) {
        let token = experiment.device_tokens.get(d).unwrap_or(&experiment.auth_token).clone();
        let request = RegisterRequest {
            device_id: d.clone(),
            roles: assignment.roles_of(d),
            auth_token: token,
            device_kind: assignment.fleet[d],
        };
        net.send(d, 0.0, Outgoing { dst: master_id.clone(), port: None, payload: request.into_message() })?;
    }

    let mut finish_time = 0.0;
    let mut protocol_errors = 0;
    while let Some(event) = net.queue.pop() {
        let now = event.time;
        finish_time = now;
        let env = event.envelope;
        let admitted = devices[&master_id].master.as_ref().is_some_and(|m| m.registry.is_admitted(&env.src));
        if !admitted && !env.payload.is_registration() {
            log::debug!("dropping {} from unadmitted {}", env.payload.variant(), env.src);
            let error = ProtocolErrorEvent {
                time: now,
                src: env.src.clone(),
                dst: env.dst.clone(),
                variant: env.payload.variant().to_string(),
                reason: REASON_UNADMITTED_SENDER.to_string(),
            };
            net.trace.push(TraceRecord::Delivery(env));
            net.trace.push(TraceRecord::ProtocolError(error));
            protocol_errors += 1;
            continue;
        }
        let outgoing = match devices.get_mut(&env.dst) {
            Some(d) => d.dispatch(&ctx, &env)?,
            None => Vec::new(),
        };
        let src = env.dst.clone();
        net.trace.push(TraceRecord::Delivery(env));
        for out in outgoing {
            net.send(&src, now, out)?;
        }
    }

    let master = devices.get_mut(&master_id).and_then(|d| d.master.take()).expect("master device exists");
    match master.phase {
        MasterPhase::Done => {}
        MasterPhase::Registering => {
            let mut rejected: Vec<(DeviceId, String)> = master
                .registry
                .entries()
                .filter(|(_, e)| e.status == AdmissionStatus::Rejected)
                .map(|(d, e)| (d.clone(), e.reason.clone().unwrap_or_default()))
                .collect();
            for d in assignment.devices() {
                if master.registry.get(d).is_none() {
                    rejected.push((d.clone(), "never registered".to_string()));
                }
            }
            return Err(SimError::Admission(rejected));
        }
        phase => return Err(SimError::Stalled(format!("event queue drained while the master was in {phase:?}"))),
    }

    let trace_hash = net.trace.hash();
    let trace = net.trace.into_records();
    let summary = summarize_records(&trace);
    let report = TrainingReport {
        epoch_losses: master.epoch_losses,
        epoch_makespans: summary.epoch_makespans,
        message_counts: summary.message_counts,
        final_params: master.params,
        trace_hash,
        device_count: assignment.device_count(),
        protocol_errors,
        finish_time,
    };
    Ok(SimulationOutcome { report, trace, assignment, plan })
}

fn device<'a>(devices: &'a mut BTreeMap<DeviceId, Device>, id: &DeviceId) -> &'a mut Device {
    devices.get_mut(id).expect("assignment lists every device")
}
