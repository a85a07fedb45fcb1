//! Benchmarking harness for publish/subscribe computational graphs.
//!
//! The crate provides an in-process pub/sub substrate ([`pubsub`]) and two
//! independent latency measurement paths: grey-box tracepoints inside the
//! substrate ([`tracer`]) and black-box endcap nodes with propagated message
//! ids ([`harness`]). Around them sit metrics, machine-readable benchmark
//! descriptors, deterministic synthetic workloads and a run orchestrator.

pub mod clock;
pub mod descriptor;
pub mod envelope;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod pubsub;
pub mod runner;
pub mod tracer;
pub mod workloads;

pub use envelope::MessageEnvelope;
