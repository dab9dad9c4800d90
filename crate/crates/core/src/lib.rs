//! Discrete-event simulation of a feed-forward neural network whose
//! neurons, layer controllers and master controller live on separate
//! airborne devices that only talk through messages.
//!
//! * [`nn`] holds the network math and a centralized reference trainer.
//! * [`protocol`] defines messages, envelopes, admission and the trace codec.
//! * [`topology`] assigns neurons to devices, plans the formation and models
//!   link latency.
//! * [`sim`] runs the device state machines on a deterministic event queue.
//! * [`metrics`] summarizes traces and compares against a datacenter baseline.

pub mod metrics;
pub mod nn;
pub mod protocol;
pub mod sim;
pub mod topology;
