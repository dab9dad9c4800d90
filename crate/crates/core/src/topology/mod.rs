//! Where neurons and controllers live, where devices fly, and how long a
//! message takes between two of them.

mod assign;
mod formation;
mod link;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::DeviceId;

pub use assign::{assign_neurons, assign_neurons_sharded, expected_device_count, Assignment, AssignmentDesign, ControllerShard};
pub use formation::{
    check_connectivity, export_formation, plan_formation, required_edges, ConnectivityViolation, FormationParams,
    FormationPlan,
};
pub use link::{link_latency, LinkMode};

/// Airframe carrying a device. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Drone,
    HotAirBalloon,
    Helicopter,
    Airplane,
    Satellite,
    Rocket,
    MannedAerialVehicle,
    UnmannedAerialVehicle,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 8] = [
        DeviceKind::Drone,
        DeviceKind::HotAirBalloon,
        DeviceKind::Helicopter,
        DeviceKind::Airplane,
        DeviceKind::Satellite,
        DeviceKind::Rocket,
        DeviceKind::MannedAerialVehicle,
        DeviceKind::UnmannedAerialVehicle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::Drone => "drone",
            DeviceKind::HotAirBalloon => "hot_air_balloon",
            DeviceKind::Helicopter => "helicopter",
            DeviceKind::Airplane => "airplane",
            DeviceKind::Satellite => "satellite",
            DeviceKind::Rocket => "rocket",
            DeviceKind::MannedAerialVehicle => "manned_aerial_vehicle",
            DeviceKind::UnmannedAerialVehicle => "unmanned_aerial_vehicle",
        }
    }
}

/// Meters; x runs along the flight axis, y is lateral, z is altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("wireless link out of range: {distance_m} m exceeds {range_m} m")]
    OutOfRange { distance_m: f64, range_m: f64 },
    #[error("no wireless connectivity between {src} and {dst}: {distance_m} m exceeds {range_m} m")]
    Disconnected { src: DeviceId, dst: DeviceId, distance_m: f64, range_m: f64 },
    #[error("device {0} has no planned position")]
    UnknownDevice(DeviceId),
}
