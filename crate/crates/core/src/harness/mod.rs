//! Measurement endcaps: the data loader, the playback node that assigns
//! message ids, and the monitor node that records their arrival.
//!
//! Workloads under test are never instrumented; the id and origin stamp ride
//! in the [`MessageEnvelope`](crate::MessageEnvelope) and are copied through.

mod log;
mod monitor;
mod playback;

pub use log::{load_log, write_log, LogError, LogRecord, MessageLog, LOG_MAGIC};
pub use monitor::{
    blackbox_latencies, monitor_collect, BlackBoxResult, MonitorCollection, MonitorNode,
    MonitorRecord,
};
pub use playback::{
    playback, LedgerEntry, PlaybackLedger, PlaybackMode, PlaybackPolicy, DEFAULT_WARMUP_DISCARD,
    MAX_RECORDED_GAP_NS,
};

use thiserror::Error;

use crate::pubsub::{PubSubError, TopicId};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("source {0} is not part of the graph")]
    UnknownSourceTopic(TopicId),
    #[error("invalid playback policy: {0}")]
    BadPolicy(String),
    #[error("negative latency for message {id}: received before it was published")]
    NegativeLatency { id: u64 },
    #[error(transparent)]
    PubSub(#[from] PubSubError),
}
