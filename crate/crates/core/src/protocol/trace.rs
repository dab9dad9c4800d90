use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::message::{DeviceId, Envelope, Message};

/// A message dropped by the network, recorded next to its delivery line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolErrorEvent {
    pub time: f64,
    pub src: DeviceId,
    pub dst: DeviceId,
    pub variant: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Delivery(Envelope),
    ProtocolError(ProtocolErrorEvent),
}

impl TraceRecord {
    pub fn envelope(&self) -> Option<&Envelope> {
        match self {
            TraceRecord::Delivery(e) => Some(e),
            TraceRecord::ProtocolError(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Line {
    Deliver {
        send_time: f64,
        deliver_time: f64,
        src: DeviceId,
        dst: DeviceId,
        port: Option<usize>,
        size_bytes: usize,
        #[serde(flatten)]
        payload: Message,
    },
    ProtocolError {
        time: f64,
        src: DeviceId,
        dst: DeviceId,
        variant: String,
        reason: String,
    },
}

#[derive(Debug, Error, PartialEq)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

/// One JSON object, no trailing newline. Field order is fixed.
pub fn encode_trace_record(record: &TraceRecord) -> String {
    let line = match record.clone() {
        TraceRecord::Delivery(e) => Line::Deliver {
            send_time: e.send_time,
            deliver_time: e.deliver_time,
            src: e.src,
            dst: e.dst,
            port: e.port,
            size_bytes: e.size_bytes,
            payload: e.payload,
        },
        TraceRecord::ProtocolError(p) => Line::ProtocolError {
            time: p.time,
            src: p.src,
            dst: p.dst,
            variant: p.variant,
            reason: p.reason,
        },
    };
    serde_json::to_string(&line).expect("trace records contain only finite numbers")
}

pub fn encode_envelope(envelope: &Envelope) -> String {
    encode_trace_record(&TraceRecord::Delivery(envelope.clone()))
}

pub fn decode_trace_record(text: &str) -> Result<TraceRecord, serde_json::Error> {
    Ok(match serde_json::from_str::<Line>(text)? {
        Line::Deliver { send_time, deliver_time, src, dst, port, size_bytes, payload } => {
            TraceRecord::Delivery(Envelope { src, dst, port, send_time, deliver_time, payload, size_bytes })
        }
        Line::ProtocolError { time, src, dst, variant, reason } => {
            TraceRecord::ProtocolError(ProtocolErrorEvent { time, src, dst, variant, reason })
        }
    })
}

/// Parses a whole trace file; blank lines are skipped and line numbers
/// are 1-based.
pub fn decode_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode_trace_record(l).map_err(|e| TraceError { line: i + 1, message: e.to_string() }))
        .collect()
}

/// In-memory trace with a running SHA-256 over its canonical encoding.
#[derive(Debug, Clone, Default)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
    hasher: Sha256,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        let line = encode_trace_record(&record);
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Hex digest of every line pushed so far, each followed by `\n`.
    pub fn hash(&self) -> String {
        hex_digest(&self.hasher.clone().finalize())
    }
}

/// Canonical text of a trace: one encoded record per line.
pub fn trace_text(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&encode_trace_record(r));
        out.push('\n');
    }
    out
}

pub fn trace_hash(text: &str) -> String {
    hex_digest(&Sha256::digest(text.as_bytes()))
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ActivationKind;
    use crate::protocol::{NeuronRange, Role};
    use crate::topology::{DeviceKind, Position};
    use proptest::prelude::*;

    fn env(payload: Message) -> Envelope {
        Envelope::new("a".into(), "b".into(), Some(1), 0.125, 0.1250003, payload)
    }

    fn samples() -> Vec<Message> {
        vec![
            Message::RegisterRequest {
                device_id: "h".into(),
                roles: vec![
                    Role::NeuronHost { layer: 1, neurons: vec![0, 1] },
                    Role::LayerController { layer: 1, neurons: NeuronRange::new(0, 2) },
                ],
                auth_token: "t".into(),
                device_kind: DeviceKind::HotAirBalloon,
            },
            Message::NavigationInstruction { device_id: "h".into(), position: Position::new(1.5, -25.0, 1000.0) },
            Message::NeuronConfig {
                layer_index: 1,
                neuron_index: 0,
                incoming_weights: vec![0.1, -0.30000000000000004],
                bias: 0.0,
                activation: ActivationKind::Relu,
            },
            Message::ShardAck { layer_index: 2, neurons: NeuronRange::new(0, 1), sample_id: None },
            Message::LossReport { epoch: 3, sample_id: 13, loss_value: 1e-300, output_delta_vector: vec![-0.0, 2.5] },
        ]
    }

    #[test]
    fn records_round_trip() {
        for m in samples() {
            let record = TraceRecord::Delivery(env(m));
            let line = encode_trace_record(&record);
            assert_eq!(decode_trace_record(&line).unwrap(), record, "{line}");
            assert_eq!(encode_trace_record(&record), line);
        }
        let err = TraceRecord::ProtocolError(ProtocolErrorEvent {
            time: 0.5,
            src: "rogue".into(),
            dst: "b".into(),
            variant: "ForwardActivation".into(),
            reason: "unadmitted_sender".into(),
        });
        assert_eq!(decode_trace_record(&encode_trace_record(&err)).unwrap(), err);
    }

    #[test]
    fn stable_field_order() {
        let line = encode_envelope(&env(Message::EpochBarrier { epoch: 2 }));
        assert_eq!(
            line,
            r#"{"event":"deliver","send_time":0.125,"deliver_time":0.1250003,"src":"a","dst":"b","port":1,"size_bytes":40,"variant":"EpochBarrier","payload":{"epoch":2}}"#
        );
    }

    #[test]
    fn n_records_give_n_lines_and_stable_hash() {
        let mut log = TraceLog::new();
        for m in samples() {
            log.push(TraceRecord::Delivery(env(m)));
        }
        let text = trace_text(log.records());
        assert_eq!(text.lines().count(), log.len());
        assert_eq!(trace_hash(&text), log.hash());
        assert_eq!(decode_trace(&text).unwrap(), log.records());
    }

    #[test]
    fn malformed_line_reports_number() {
        let good = encode_envelope(&env(Message::EpochBarrier { epoch: 0 }));
        let text = format!("{good}\n{{\"event\":\"deliver\"}}\n");
        let err = decode_trace(&text).unwrap_err();
        assert_eq!(err.line, 2);
    }

    proptest! {
        #[test]
        fn forward_activation_round_trips(
            send in 0.0f64..1e4,
            latency in 0.0f64..1.0,
            value in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
            sample in any::<u64>(),
            port in proptest::option::of(0usize..1000),
        ) {
            let e = Envelope::new(
                "src".into(),
                "dst".into(),
                port,
                send,
                send + latency,
                Message::ForwardActivation { sample_id: sample, layer_index: 2, neuron_index: 4, value },
            );
            let decoded = decode_trace_record(&encode_envelope(&e)).unwrap();
            prop_assert_eq!(decoded, TraceRecord::Delivery(e));
        }
    }
}
