use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::message::{DeviceId, Message, Role};
use crate::nn::NetworkSpec;
use crate::topology::DeviceKind;

pub const REASON_AUTH_FAILED: &str = "auth_failed";
pub const REASON_DUPLICATE_DEVICE: &str = "duplicate_device";
pub const REASON_INVALID_ROLE: &str = "invalid_role";
pub const REASON_ROLE_CONFLICT: &str = "role_conflict";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionStatus {
    Pending,
    Admitted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub roles: Vec<Role>,
    pub status: AdmissionStatus,
    pub device_kind: DeviceKind,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub device_id: DeviceId,
    pub roles: Vec<Role>,
    pub auth_token: String,
    pub device_kind: DeviceKind,
}

impl RegisterRequest {
    pub fn from_message(message: &Message) -> Option<Self> {
        match message {
            Message::RegisterRequest { device_id, roles, auth_token, device_kind } => Some(RegisterRequest {
                device_id: device_id.clone(),
                roles: roles.clone(),
                auth_token: auth_token.clone(),
                device_kind: *device_kind,
            }),
            _ => None,
        }
    }

    pub fn into_message(self) -> Message {
        Message::RegisterRequest {
            device_id: self.device_id,
            roles: self.roles,
            auth_token: self.auth_token,
            device_kind: self.device_kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub admitted: bool,
    pub reason: String,
}

impl RegisterResponse {
    fn admitted() -> Self {
        RegisterResponse { admitted: true, reason: String::new() }
    }

    fn rejected(reason: &str) -> Self {
        RegisterResponse { admitted: false, reason: reason.to_string() }
    }

    pub fn into_message(self) -> Message {
        Message::RegisterResponse { admitted: self.admitted, reason: self.reason }
    }
}

/// Missing pieces of a fully admitted fleet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverageGap {
    NoMaster,
    NoInputProvider,
    NoOutputReceiver,
    NoController { layer: usize },
    UnhostedNeuron { layer: usize, neuron: usize },
}

/// The master's record of every device that asked to join.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRegistry {
    entries: BTreeMap<DeviceId, RegistryEntry>,
}

impl AdmissionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding only the master itself, admitted.
    pub fn with_master(master: DeviceId, kind: DeviceKind) -> Self {
        let mut registry = Self::new();
        registry.entries.insert(
            master,
            RegistryEntry { roles: vec![Role::Master], status: AdmissionStatus::Admitted, device_kind: kind, reason: None },
        );
        registry
    }

    pub fn get(&self, id: &DeviceId) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn is_admitted(&self, id: &DeviceId) -> bool {
        self.entries.get(id).is_some_and(|e| e.status == AdmissionStatus::Admitted)
    }

    pub fn admitted(&self) -> impl Iterator<Item = (&DeviceId, &RegistryEntry)> {
        self.entries.iter().filter(|(_, e)| e.status == AdmissionStatus::Admitted)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DeviceId, &RegistryEntry)> {
        self.entries.iter()
    }

    /// Checks a registration and records the outcome.
    ///
    /// Admission needs the shared token, an id that is not already pending
    /// or admitted, and roles that are valid for `spec` and not claimed by
    /// an admitted device. A rejected id may try again.
    pub fn verify_registration(
        &mut self,
        request: &RegisterRequest,
        expected_token: &str,
        spec: &NetworkSpec,
    ) -> RegisterResponse {
        let response = self.evaluate(request, expected_token, spec);
        let status = if response.admitted { AdmissionStatus::Admitted } else { AdmissionStatus::Rejected };
        let fresh = self.entries.get(&request.device_id).is_none_or(|e| e.status == AdmissionStatus::Rejected);
        if fresh {
            self.entries.insert(
                request.device_id.clone(),
                RegistryEntry {
                    roles: request.roles.clone(),
                    status,
                    device_kind: request.device_kind,
                    reason: (!response.admitted).then(|| response.reason.clone()),
                },
            );
        }
        response
    }

    fn evaluate(&self, request: &RegisterRequest, expected_token: &str, spec: &NetworkSpec) -> RegisterResponse {
        if request.auth_token != expected_token {
            return RegisterResponse::rejected(REASON_AUTH_FAILED);
        }
        if request.device_id.as_str().is_empty() {
            return RegisterResponse::rejected(REASON_INVALID_ROLE);
        }
        if self.entries.get(&request.device_id).is_some_and(|e| e.status != AdmissionStatus::Rejected) {
            return RegisterResponse::rejected(REASON_DUPLICATE_DEVICE);
        }
        if !roles_valid(&request.roles, spec) {
            return RegisterResponse::rejected(REASON_INVALID_ROLE);
        }
        let conflict = request.roles.iter().any(|role| {
            self.admitted().any(|(_, entry)| entry.roles.iter().any(|held| roles_conflict(role, held)))
        });
        if conflict {
            return RegisterResponse::rejected(REASON_ROLE_CONFLICT);
        }
        RegisterResponse::admitted()
    }

    /// Lists what is still missing for a complete fleet; empty when every
    /// neuron has exactly one host and every role is filled.
    pub fn coverage_gaps(&self, spec: &NetworkSpec) -> Vec<CoverageGap> {
        let roles: Vec<&Role> = self.admitted().flat_map(|(_, e)| e.roles.iter()).collect();
        let mut gaps = Vec::new();
        if !roles.iter().any(|r| matches!(r, Role::Master)) {
            gaps.push(CoverageGap::NoMaster);
        }
        if !roles.iter().any(|r| matches!(r, Role::InputProvider)) {
            gaps.push(CoverageGap::NoInputProvider);
        }
        if !roles.iter().any(|r| matches!(r, Role::OutputReceiver)) {
            gaps.push(CoverageGap::NoOutputReceiver);
        }
        for (layer, &size) in spec.layer_sizes.iter().enumerate() {
            if layer > 0 && !roles.iter().any(|r| matches!(r, Role::LayerController { layer: l, .. } if *l == layer)) {
                gaps.push(CoverageGap::NoController { layer });
            }
            for neuron in 0..size {
                let hosted = roles.iter().any(|r| {
                    matches!(r, Role::NeuronHost { layer: l, neurons } if *l == layer && neurons.contains(&neuron))
                });
                if !hosted {
                    gaps.push(CoverageGap::UnhostedNeuron { layer, neuron });
                }
            }
        }
        gaps
    }
}

fn role_valid(role: &Role, spec: &NetworkSpec) -> bool {
    match role {
        Role::Master | Role::InputProvider | Role::OutputReceiver => true,
        Role::LayerController { layer, neurons } => {
            *layer >= 1 && *layer < spec.layer_count() && !neurons.is_empty() && neurons.end <= spec.layer_sizes[*layer]
        }
        Role::NeuronHost { layer, neurons } => {
            if *layer >= spec.layer_count() || neurons.is_empty() {
                return false;
            }
            let size = spec.layer_sizes[*layer];
            let mut sorted = neurons.clone();
            sorted.sort_unstable();
            sorted.dedup();
            sorted.len() == neurons.len() && sorted.iter().all(|&n| n < size)
        }
    }
}

/// A device may combine a controller with hosted neurons of the same layer;
/// any other combination of roles is invalid.
fn roles_valid(roles: &[Role], spec: &NetworkSpec) -> bool {
    if roles.is_empty() || !roles.iter().all(|r| role_valid(r, spec)) {
        return false;
    }
    if roles.len() == 1 {
        return true;
    }
    let mut layer = None;
    for role in roles {
        let l = match role {
            Role::LayerController { layer, .. } | Role::NeuronHost { layer, .. } => *layer,
            _ => return false,
        };
        if *layer.get_or_insert(l) != l {
            return false;
        }
    }
    let hosts = roles.iter().filter(|r| matches!(r, Role::NeuronHost { .. })).count();
    hosts <= 1
}

fn roles_conflict(a: &Role, b: &Role) -> bool {
    match (a, b) {
        (Role::Master, Role::Master) => true,
        (Role::LayerController { layer: la, neurons: ra }, Role::LayerController { layer: lb, neurons: rb }) => {
            la == lb && ra.overlaps(rb)
        }
        (Role::NeuronHost { layer: la, neurons: na }, Role::NeuronHost { layer: lb, neurons: nb }) => {
            la == lb && na.iter().any(|n| nb.contains(n))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ActivationKind, LossKind, OptimizerKind};
    use crate::protocol::NeuronRange;

    fn spec() -> NetworkSpec {
        NetworkSpec {
            layer_sizes: vec![2, 2, 1],
            activations: vec![ActivationKind::Sigmoid; 2],
            loss: LossKind::MeanSquaredError,
            epochs: 1,
            optimizer: OptimizerKind::Sgd { learning_rate: 0.5 },
            seed: 1,
        }
    }

    fn request(id: &str, roles: Vec<Role>, token: &str) -> RegisterRequest {
        RegisterRequest { device_id: id.into(), roles, auth_token: token.into(), device_kind: DeviceKind::Drone }
    }

    fn host(layer: usize, neurons: &[usize]) -> Role {
        Role::NeuronHost { layer, neurons: neurons.to_vec() }
    }

    #[test]
    fn happy_path_admits() {
        let mut reg = AdmissionRegistry::with_master("m".into(), DeviceKind::Airplane);
        let r = reg.verify_registration(&request("a", vec![host(1, &[0, 1])], "tok"), "tok", &spec());
        assert!(r.admitted);
        assert!(reg.is_admitted(&"a".into()));
    }

    #[test]
    fn wrong_token_rejected() {
        let mut reg = AdmissionRegistry::new();
        let r = reg.verify_registration(&request("a", vec![host(1, &[0])], "nope"), "tok", &spec());
        assert_eq!(r, RegisterResponse::rejected(REASON_AUTH_FAILED));
        assert_eq!(reg.get(&"a".into()).unwrap().status, AdmissionStatus::Rejected);
    }

    #[test]
    fn second_claim_on_neuron_conflicts() {
        let mut reg = AdmissionRegistry::new();
        assert!(reg.verify_registration(&request("a", vec![host(1, &[0])], "t"), "t", &spec()).admitted);
        let r = reg.verify_registration(&request("b", vec![host(1, &[0])], "t"), "t", &spec());
        assert_eq!(r.reason, REASON_ROLE_CONFLICT);
        assert!(!reg.is_admitted(&"b".into()));
    }

    #[test]
    fn duplicate_id_and_second_master_rejected() {
        let mut reg = AdmissionRegistry::with_master("m".into(), DeviceKind::Airplane);
        let r = reg.verify_registration(&request("m", vec![Role::InputProvider], "t"), "t", &spec());
        assert_eq!(r.reason, REASON_DUPLICATE_DEVICE);
        let r = reg.verify_registration(&request("m2", vec![Role::Master], "t"), "t", &spec());
        assert_eq!(r.reason, REASON_ROLE_CONFLICT);
    }

    #[test]
    fn invalid_roles_rejected() {
        let mut reg = AdmissionRegistry::new();
        let bad = [
            vec![host(3, &[0])],
            vec![host(2, &[1])],
            vec![host(1, &[])],
            vec![host(1, &[0, 0])],
            vec![Role::LayerController { layer: 0, neurons: NeuronRange::new(0, 2) }],
            vec![Role::LayerController { layer: 1, neurons: NeuronRange::new(1, 1) }],
            vec![Role::LayerController { layer: 1, neurons: NeuronRange::new(0, 2) }, host(2, &[0])],
            vec![Role::InputProvider, Role::OutputReceiver],
            vec![],
        ];
        for roles in bad {
            let r = reg.verify_registration(&request("x", roles.clone(), "t"), "t", &spec());
            assert_eq!(r.reason, REASON_INVALID_ROLE, "{roles:?}");
        }
        let colocated = vec![Role::LayerController { layer: 1, neurons: NeuronRange::new(0, 2) }, host(1, &[0, 1])];
        assert!(reg.verify_registration(&request("x", colocated, "t"), "t", &spec()).admitted);
    }

    #[test]
    fn coverage_reports_missing_roles() {
        let s = spec();
        let mut reg = AdmissionRegistry::with_master("m".into(), DeviceKind::Airplane);
        assert!(reg.coverage_gaps(&s).contains(&CoverageGap::UnhostedNeuron { layer: 0, neuron: 1 }));
        let roles = [
            ("i", vec![Role::InputProvider]),
            ("o", vec![Role::OutputReceiver]),
            ("h0", vec![host(0, &[0, 1])]),
            ("h1", vec![host(1, &[0, 1]), Role::LayerController { layer: 1, neurons: NeuronRange::new(0, 2) }]),
            ("h2", vec![host(2, &[0])]),
        ];
        for (id, r) in roles {
            assert!(reg.verify_registration(&request(id, r, "t"), "t", &s).admitted);
        }
        assert_eq!(reg.coverage_gaps(&s), vec![CoverageGap::NoController { layer: 2 }]);
        let c = vec![Role::LayerController { layer: 2, neurons: NeuronRange::new(0, 1) }];
        assert!(reg.verify_registration(&request("c2", c, "t"), "t", &s).admitted);
        assert!(reg.coverage_gaps(&s).is_empty());
    }
}
