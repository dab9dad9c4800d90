use serde::{Deserialize, Serialize};

use super::{Position, TopologyError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LinkMode {
    Wireless { range_m: f64, bandwidth_bps: f64, propagation_mps: f64, per_hop_overhead_s: f64 },
    Wired { per_hop_latency_s: f64, bandwidth_bps: f64 },
}

impl LinkMode {
    pub const DEFAULT_BANDWIDTH_BPS: f64 = 1e8;

    /// 100 µs per hop at 100 Mbit/s.
    pub fn default_wired() -> Self {
        LinkMode::Wired { per_hop_latency_s: 1e-4, bandwidth_bps: Self::DEFAULT_BANDWIDTH_BPS }
    }

    /// 1 ms radio overhead, light-speed propagation, 2 km range, 100 Mbit/s.
    pub fn default_wireless() -> Self {
        LinkMode::Wireless {
            range_m: 2000.0,
            bandwidth_bps: Self::DEFAULT_BANDWIDTH_BPS,
            propagation_mps: 3e8,
            per_hop_overhead_s: 1e-3,
        }
    }

    pub fn is_wired(&self) -> bool {
        matches!(self, LinkMode::Wired { .. })
    }

    pub fn range_m(&self) -> Option<f64> {
        match self {
            LinkMode::Wireless { range_m, .. } => Some(*range_m),
            LinkMode::Wired { .. } => None,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let positive = |name: &str, v: f64| (!(v > 0.0 && v.is_finite())).then(|| format!("{name} must be > 0"));
        match *self {
            LinkMode::Wireless { range_m, bandwidth_bps, propagation_mps, per_hop_overhead_s } => [
                positive("range_m", range_m),
                positive("bandwidth_bps", bandwidth_bps),
                positive("propagation_mps", propagation_mps),
                (!(per_hop_overhead_s >= 0.0 && per_hop_overhead_s.is_finite()))
                    .then(|| "per_hop_overhead_s must be >= 0".to_string()),
            ]
            .into_iter()
            .flatten()
            .collect(),
            LinkMode::Wired { per_hop_latency_s, bandwidth_bps } => {
                [positive("per_hop_latency_s", per_hop_latency_s), positive("bandwidth_bps", bandwidth_bps)]
                    .into_iter()
                    .flatten()
                    .collect()
            }
        }
    }
}

/// One-hop delay: fixed overhead plus serialization, plus propagation for
/// wireless links. Wired links ignore geometry.
pub fn link_latency(mode: &LinkMode, src: &Position, dst: &Position, size_bytes: usize) -> Result<f64, TopologyError> {
    let bits = 8.0 * size_bytes as f64;
    match *mode {
        LinkMode::Wired { per_hop_latency_s, bandwidth_bps } => Ok(per_hop_latency_s + bits / bandwidth_bps),
        LinkMode::Wireless { range_m, bandwidth_bps, propagation_mps, per_hop_overhead_s } => {
            let distance_m = src.distance(dst);
            if distance_m > range_m {
                return Err(TopologyError::OutOfRange { distance_m, range_m });
            }
            Ok(per_hop_overhead_s + distance_m / propagation_mps + bits / bandwidth_bps)
        }
    }
}
