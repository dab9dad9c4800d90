//! Latency and message statistics over a materialized trace, and the
//! comparison against a remote-datacenter round trip.
//!
//! Sample timings follow the training protocol: a sample starts when the
//! input provider sends its first `InputVector`, its forward pass ends when
//! the output receiver sends the `LossReport`, and it completes with the
//! last `ShardAck` for that sample arriving at the master. Deliveries that
//! the network dropped still count as traffic but never as timing points.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::protocol::{decode_trace, Message, TraceError, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLatency {
    pub sample_id: u64,
    pub epoch: usize,
    pub forward_latency_s: f64,
    pub makespan_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    /// Indexed by epoch.
    pub epoch_makespans: Vec<f64>,
    /// Ascending sample id.
    pub samples: Vec<SampleLatency>,
    pub message_counts: BTreeMap<String, usize>,
    pub message_bytes: BTreeMap<String, usize>,
    pub total_messages: usize,
    pub total_bytes: usize,
    pub protocol_errors: usize,
}

impl LatencySummary {
    pub fn mean_forward_latency(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let total: f64 = self.samples.iter().map(|s| s.forward_latency_s).sum();
        Some(total / self.samples.len() as f64)
    }

    pub fn max_sample_makespan(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.makespan_s).reduce(f64::max)
    }
}

#[derive(Default)]
struct SampleMarks {
    epoch: Option<usize>,
    start: Option<f64>,
    loss_sent: Option<f64>,
    last_ack: Option<f64>,
}

fn min_into(slot: &mut Option<f64>, t: f64) {
    *slot = Some(slot.map_or(t, |v| v.min(t)));
}

fn max_into(slot: &mut Option<f64>, t: f64) {
    *slot = Some(slot.map_or(t, |v| v.max(t)));
}

/// Parses a trace file and summarizes it.
pub fn summarize_trace(text: &str) -> Result<LatencySummary, TraceError> {
    Ok(summarize_records(&decode_trace(text)?))
}

/// Aggregates with sums, minima and maxima only, so record order does not
/// matter.
pub fn summarize_records(records: &[TraceRecord]) -> LatencySummary {
    let dropped: HashSet<(u64, &str, &str, &str)> = records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::ProtocolError(e) => Some((e.time.to_bits(), e.src.as_str(), e.dst.as_str(), e.variant.as_str())),
            TraceRecord::Delivery(_) => None,
        })
        .collect();
    let mut summary = LatencySummary::default();
    let mut marks: BTreeMap<u64, SampleMarks> = BTreeMap::new();
    for record in records {
        let env = match record {
            TraceRecord::Delivery(env) => env,
            TraceRecord::ProtocolError(_) => {
                summary.protocol_errors += 1;
                continue;
            }
        };
        let variant = env.payload.variant();
        *summary.message_counts.entry(variant.to_string()).or_default() += 1;
        *summary.message_bytes.entry(variant.to_string()).or_default() += env.size_bytes;
        summary.total_messages += 1;
        summary.total_bytes += env.size_bytes;
        if dropped.contains(&(env.deliver_time.to_bits(), env.src.as_str(), env.dst.as_str(), variant)) {
            continue;
        }
        match env.payload {
            Message::InputVector { sample_id, .. } => min_into(&mut marks.entry(sample_id).or_default().start, env.send_time),
            Message::LossReport { epoch, sample_id, .. } => {
                let m = marks.entry(sample_id).or_default();
                m.epoch = Some(epoch);
                max_into(&mut m.loss_sent, env.send_time);
            }
            Message::ShardAck { sample_id: Some(sample_id), .. } => {
                max_into(&mut marks.entry(sample_id).or_default().last_ack, env.deliver_time)
            }
            _ => {}
        }
    }
    let mut epochs: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (sample_id, m) in marks {
        let (Some(epoch), Some(start), Some(loss_sent)) = (m.epoch, m.start, m.loss_sent) else {
            continue;
        };
        let end = m.last_ack.unwrap_or(loss_sent);
        let e = epochs.entry(epoch).or_default();
        min_into(&mut e.0, start);
        max_into(&mut e.1, end);
        summary.samples.push(SampleLatency {
            sample_id,
            epoch,
            forward_latency_s: loss_sent - start,
            makespan_s: end - start,
        });
    }
    if let Some(&last) = epochs.keys().next_back() {
        summary.epoch_makespans = (0..=last)
            .map(|e| match epochs.get(&e) {
                Some(&(Some(start), Some(end))) => end - start,
                _ => 0.0,
            })
            .collect();
    }
    summary
}

/// Parameters of the remote-datacenter alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatacenterBaseline {
    pub uplink_bandwidth_bps: f64,
    pub downlink_bandwidth_bps: f64,
    pub round_trip_time_s: f64,
    #[serde(default)]
    pub per_sample_compute_time_s: f64,
}

impl DatacenterBaseline {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, v) in [
            ("uplink_bandwidth_bps", self.uplink_bandwidth_bps),
            ("downlink_bandwidth_bps", self.downlink_bandwidth_bps),
            ("round_trip_time_s", self.round_trip_time_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("{name} must be > 0"));
            }
        }
        if !(self.per_sample_compute_time_s >= 0.0 && self.per_sample_compute_time_s.is_finite()) {
            errors.push("per_sample_compute_time_s must be >= 0".to_string());
        }
        errors
    }
}

/// Seconds to ship one sample to the datacenter and get its result back.
pub fn baseline_latency(baseline: &DatacenterBaseline, sample_bytes: usize, result_bytes: usize) -> f64 {
    baseline.round_trip_time_s
        + 8.0 * sample_bytes as f64 / baseline.uplink_bandwidth_bps
        + 8.0 * result_bytes as f64 / baseline.downlink_bandwidth_bps
        + baseline.per_sample_compute_time_s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    /// Slowest per-sample makespan (forward and backward) of the run.
    pub airborne_per_sample_s: f64,
    pub baseline_per_sample_s: f64,
    pub airborne_faster: bool,
}

/// Compares the slowest simulated sample against the datacenter round
/// trip. `None` when the trace holds no complete sample.
pub fn compare_to_baseline(
    summary: &LatencySummary,
    baseline: &DatacenterBaseline,
    sample_bytes: usize,
    result_bytes: usize,
) -> Option<BaselineComparison> {
    let airborne = summary.max_sample_makespan()?;
    let remote = baseline_latency(baseline, sample_bytes, result_bytes);
    Some(BaselineComparison { airborne_per_sample_s: airborne, baseline_per_sample_s: remote, airborne_faster: airborne < remote })
}

/// `epoch,makespan_s,mean_loss` table with one row per epoch.
pub fn latency_table(epoch_makespans: &[f64], epoch_losses: &[f64]) -> String {
    let mut out = String::from("epoch,makespan_s,mean_loss\n");
    for (e, (m, l)) in epoch_makespans.iter().zip(epoch_losses).enumerate() {
        out.push_str(&format!("{e},{m},{l}\n"));
    }
    out
}
