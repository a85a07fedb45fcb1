//! Offline end-to-end latency reconstruction from a trace.

use std::collections::{BTreeMap, HashMap};

use super::{EventType, TraceError, TraceEvent};
use crate::metrics::{LatencySample, Methodology};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GreyBoxResult {
    /// One sample per matched id at or above the warm-up cutoff, ascending id.
    pub samples: Vec<LatencySample>,
    pub lost: u64,
    pub considered: u64,
    /// Published ids (warm-up included) that reached the sink.
    pub delivered: u64,
    pub last_sink_end: Option<u64>,
}

/// Pair source-topic PUBLISH events with sink-node CALLBACK_END events by
/// message id.
///
/// For each id the earliest publish and the earliest sink end are used. Ids
/// below `warmup_discard` are excluded from samples and loss accounting.
pub fn greybox_latencies(
    events: &[TraceEvent],
    source_topic_hash: u64,
    sink_node_hash: u64,
    warmup_discard: u64,
) -> Result<GreyBoxResult, TraceError> {
    let mut published: BTreeMap<u64, u64> = BTreeMap::new();
    let mut finished: HashMap<u64, u64> = HashMap::new();
    for e in events {
        match e.event_type {
            EventType::Publish if e.subject_hash == source_topic_hash => {
                let t = published.entry(e.message_id).or_insert(e.timestamp);
                *t = (*t).min(e.timestamp);
            }
            EventType::CallbackEnd if e.subject_hash == sink_node_hash => {
                let t = finished.entry(e.message_id).or_insert(e.timestamp);
                *t = (*t).min(e.timestamp);
            }
            _ => {}
        }
    }

    let mut out = GreyBoxResult::default();
    for (&id, &published_at) in &published {
        let end = finished.get(&id).copied();
        if let Some(end) = end {
            out.delivered += 1;
            out.last_sink_end = Some(out.last_sink_end.map_or(end, |t| t.max(end)));
        }
        if id < warmup_discard {
            continue;
        }
        out.considered += 1;
        match end {
            Some(end) if end < published_at => {
                return Err(TraceError::NegativeLatency { message_id: id })
            }
            Some(end) => out.samples.push(LatencySample {
                message_id: id,
                latency_ns: end - published_at,
                methodology: Methodology::GreyBox,
            }),
            None => out.lost += 1,
        }
    }
    Ok(out)
}
