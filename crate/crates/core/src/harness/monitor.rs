//! The monitor endcap and black-box latency computation.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use super::playback::PlaybackLedger;
use super::HarnessError;
use crate::clock;
use crate::envelope::MessageEnvelope;
use crate::metrics::{LatencySample, Methodology};
use crate::pubsub::{CallbackContext, CallbackError, NodeDescriptor, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorRecord {
    pub id: u64,
    pub recv_stamp: u64,
    pub topic: TopicId,
}

#[derive(Debug, Default)]
struct MonitorState {
    records: Vec<MonitorRecord>,
    seen: HashSet<u64>,
    duplicates: u64,
}

/// Subscribes to a graph's output and stamps every arriving id.
#[derive(Debug, Clone, Default)]
pub struct MonitorNode {
    state: Arc<Mutex<MonitorState>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MonitorCollection {
    /// One record per distinct id, ascending id.
    pub records: Vec<MonitorRecord>,
    pub duplicate_count: u64,
}

impl MonitorNode {
    pub fn new() -> Self {
        Self::default()
    }

    /// Node descriptor subscribing this monitor to `topics`.
    pub fn descriptor(&self, name: &str, topics: &[TopicId]) -> NodeDescriptor {
        let state = Arc::clone(&self.state);
        let callback = move |_: &mut CallbackContext<'_>,
                             topic: TopicId,
                             env: &MessageEnvelope|
              -> Result<(), CallbackError> {
            let recv_stamp = clock::now_ns();
            let mut s = state.lock().unwrap();
            if s.seen.insert(env.id) {
                s.records.push(MonitorRecord {
                    id: env.id,
                    recv_stamp,
                    topic,
                });
            } else {
                s.duplicates += 1;
            }
            Ok(())
        };
        topics
            .iter()
            .fold(NodeDescriptor::new(name, callback), |d, &t| d.subscribe(t))
    }
}

/// Records gathered by `monitor`. Call after the run has finished.
pub fn monitor_collect(monitor: &MonitorNode) -> MonitorCollection {
    let s = monitor.state.lock().unwrap();
    let mut records = s.records.clone();
    records.sort_by_key(|r| r.id);
    MonitorCollection {
        records,
        duplicate_count: s.duplicates,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlackBoxResult {
    pub samples: Vec<LatencySample>,
    pub matched: u64,
    pub lost: u64,
    pub considered: u64,
    pub loss_rate: f64,
    /// Received ids absent from the ledger.
    pub phantom_count: u64,
    /// Ledger ids (warm-up included) that reached the monitor.
    pub delivered: u64,
    pub last_recv: Option<u64>,
}

/// Match monitor arrivals to ledger entries by id.
pub fn blackbox_latencies(
    ledger: &PlaybackLedger,
    records: &[MonitorRecord],
    warmup_discard: u64,
) -> Result<BlackBoxResult, HarnessError> {
    let mut out = BlackBoxResult::default();
    let mut received = std::collections::HashMap::with_capacity(records.len());
    for r in records {
        if ledger.get(r.id).is_none() {
            out.phantom_count += 1;
            continue;
        }
        received.entry(r.id).or_insert(r.recv_stamp);
    }
    for entry in &ledger.entries {
        let recv = received.get(&entry.id).copied();
        if let Some(t) = recv {
            out.delivered += 1;
            out.last_recv = Some(out.last_recv.map_or(t, |l| l.max(t)));
        }
        if entry.id < warmup_discard {
            continue;
        }
        out.considered += 1;
        match recv {
            Some(t) if t < entry.origin_stamp => {
                return Err(HarnessError::NegativeLatency { id: entry.id })
            }
            Some(t) => {
                out.matched += 1;
                out.samples.push(LatencySample {
                    message_id: entry.id,
                    latency_ns: t - entry.origin_stamp,
                    methodology: Methodology::BlackBox,
                });
            }
            None => out.lost += 1,
        }
    }
    out.loss_rate = if out.considered == 0 {
        0.0
    } else {
        out.lost as f64 / out.considered as f64
    };
    Ok(out)
}
