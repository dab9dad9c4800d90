//! Messages exchanged between devices, their wire sizes, the admission
//! registry kept by the master, and the line-oriented trace codec.

mod admission;
mod message;
mod trace;

pub use admission::{
    AdmissionRegistry, AdmissionStatus, CoverageGap, RegisterRequest, RegisterResponse, RegistryEntry,
    REASON_AUTH_FAILED, REASON_DUPLICATE_DEVICE, REASON_INVALID_ROLE, REASON_ROLE_CONFLICT,
};
pub use message::{message_size, DeviceId, Envelope, Message, NeuronGradient, NeuronRange, Role, HEADER_BYTES};
pub use trace::{
    decode_trace, decode_trace_record, encode_envelope, encode_trace_record, trace_hash, trace_text,
    ProtocolErrorEvent, TraceError, TraceLog, TraceRecord,
};
