//! Timed replay of a [`MessageLog`] into a running graph.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::log::MessageLog;
use super::HarnessError;
use crate::clock;
use crate::envelope::MessageEnvelope;
use crate::pubsub::{Graph, TopicId};

/// Longest inter-record gap reproduced in recorded-timing mode.
pub const MAX_RECORDED_GAP_NS: u64 = 10_000_000_000;
pub const DEFAULT_WARMUP_DISCARD: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlaybackMode {
    FixedRate { hz: f64 },
    RecordedTiming,
    AsFastAsPossible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyDoc", into = "PolicyDoc")]
pub struct PlaybackPolicy {
    pub mode: PlaybackMode,
    pub message_limit: Option<u64>,
    /// Initial ids excluded from latency statistics.
    pub warmup_discard: u64,
}

impl Default for PlaybackPolicy {
    fn default() -> Self {
        PlaybackPolicy {
            mode: PlaybackMode::AsFastAsPossible,
            message_limit: None,
            warmup_discard: DEFAULT_WARMUP_DISCARD,
        }
    }
}

impl PlaybackPolicy {
    pub fn fixed_rate(hz: f64) -> Self {
        PlaybackPolicy {
            mode: PlaybackMode::FixedRate { hz },
            ..Default::default()
        }
    }

    pub fn with_limit(mut self, limit: u64) -> Self {
        self.message_limit = Some(limit);
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup_discard = warmup;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let PlaybackMode::FixedRate { hz } = self.mode {
            if !(hz > 0.0 && hz.is_finite()) {
                return Err(HarnessError::BadPolicy(format!("rate must be positive, got {hz}")));
            }
        }
        if let Some(limit) = self.message_limit {
            if self.warmup_discard >= limit {
                return Err(HarnessError::BadPolicy(format!(
                    "warmup_discard {} must be below message_limit {limit}",
                    self.warmup_discard
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    message_limit: Option<u64>,
    #[serde(default = "default_warmup")]
    warmup_discard: u64,
}

fn default_warmup() -> u64 {
    DEFAULT_WARMUP_DISCARD
}

impl TryFrom<PolicyDoc> for PlaybackPolicy {
    type Error = HarnessError;

    fn try_from(doc: PolicyDoc) -> Result<Self, Self::Error> {
        let mode = match (doc.mode.as_str(), doc.hz) {
            ("fixed_rate", Some(hz)) => PlaybackMode::FixedRate { hz },
            ("fixed_rate", None) => {
                return Err(HarnessError::BadPolicy("fixed_rate requires hz".into()))
            }
            ("recorded_timing", None) => PlaybackMode::RecordedTiming,
            ("as_fast_as_possible", None) => PlaybackMode::AsFastAsPossible,
            ("recorded_timing" | "as_fast_as_possible", Some(_)) => {
                return Err(HarnessError::BadPolicy(format!("hz is only valid for fixed_rate, not {}", doc.mode)))
            }
            (other, _) => return Err(HarnessError::BadPolicy(format!("unknown playback mode {other:?}"))),
        };
        let policy = PlaybackPolicy {
            mode,
            message_limit: doc.message_limit,
            warmup_discard: doc.warmup_discard,
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl From<PlaybackPolicy> for PolicyDoc {
    fn from(p: PlaybackPolicy) -> Self {
        let (mode, hz) = match p.mode {
            PlaybackMode::FixedRate { hz } => ("fixed_rate", Some(hz)),
            PlaybackMode::RecordedTiming => ("recorded_timing", None),
            PlaybackMode::AsFastAsPossible => ("as_fast_as_possible", None),
        };
        PolicyDoc {
            mode: mode.to_owned(),
            hz,
            message_limit: p.message_limit,
            warmup_discard: p.warmup_discard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    pub id: u64,
    pub origin_stamp: u64,
    pub topic: TopicId,
}

/// What the playback node published: id → (origin stamp, topic).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaybackLedger {
    /// Ascending by id; ids are dense from 0 unless restricted.
    pub entries: Vec<LedgerEntry>,
    pub start_ns: u64,
    /// End of the playback period. For fixed-rate playback this is the start
    /// plus one period per message.
    pub end_ns: u64,
    pub mode: Option<PlaybackMode>,
}

impl PlaybackLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&LedgerEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Entries published on `topic` only (fan-in attribution).
    pub fn restricted_to(&self, topic: TopicId) -> PlaybackLedger {
        PlaybackLedger {
            entries: self.entries.iter().filter(|e| e.topic == topic).copied().collect(),
            ..self.clone()
        }
    }

    /// Mean publish rate between the first and last publish, in Hz.
    pub fn achieved_rate(&self) -> Option<f64> {
        let (first, last) = (self.entries.first()?, self.entries.last()?);
        if self.entries.len() < 2 || last.origin_stamp <= first.origin_stamp {
            return None;
        }
        Some((self.entries.len() - 1) as f64 / ((last.origin_stamp - first.origin_stamp) as f64 / 1e9))
    }

    /// For fixed-rate playback, whether the achieved rate is within
    /// `tolerance` (relative) of the target. `None` for other modes.
    pub fn rate_fidelity(&self, tolerance: f64) -> Option<bool> {
        match self.mode? {
            PlaybackMode::FixedRate { hz } => {
                let achieved = self.achieved_rate()?;
                Some(((achieved - hz) / hz).abs() <= tolerance)
            }
            _ => None,
        }
    }
}

/// Publish the log's records on `source_topics` with the policy's timing.
///
/// Runs on the calling thread. Log topics are matched to graph topics by
/// name; records on other topics are skipped.
pub fn playback(
    log: &MessageLog,
    policy: &PlaybackPolicy,
    graph: &Graph,
    source_topics: &[TopicId],
) -> Result<PlaybackLedger, HarnessError> {
    policy.validate()?;
    for &t in source_topics {
        if !graph.has_topic(t) {
            return Err(HarnessError::UnknownSourceTopic(t));
        }
    }
    let mut route: HashMap<TopicId, TopicId> = HashMap::new();
    for (name, log_id) in &log.topics {
        if let Some(g) = graph.topic_id(name).filter(|g| source_topics.contains(g)) {
            route.insert(*log_id, g);
        }
    }

    let limit = policy.message_limit.unwrap_or(u64::MAX) as usize;
    let selected: Vec<_> = log
        .records
        .iter()
        .filter_map(|r| route.get(&r.topic).map(|&g| (g, r)))
        .take(limit)
        .collect();

    // Offsets from playback start, in ns.
    let offsets: Vec<u64> = match policy.mode {
        PlaybackMode::FixedRate { hz } => {
            let period = 1e9 / hz;
            (0..selected.len()).map(|k| (k as f64 * period).round() as u64).collect()
        }
        PlaybackMode::RecordedTiming => {
            let mut acc = 0u64;
            let mut prev = selected.first().map(|(_, r)| r.recorded_stamp).unwrap_or(0);
            selected
                .iter()
                .map(|(_, r)| {
                    acc += (r.recorded_stamp - prev).min(MAX_RECORDED_GAP_NS);
                    prev = r.recorded_stamp;
                    acc
                })
                .collect()
        }
        PlaybackMode::AsFastAsPossible => vec![0; selected.len()],
    };

    let start = clock::now_ns();
    let mut ledger = PlaybackLedger {
        entries: Vec::with_capacity(selected.len()),
        start_ns: start,
        end_ns: start,
        mode: Some(policy.mode),
    };
    let mut prev_stamp = None;
    for (id, ((topic, record), offset)) in selected.into_iter().zip(offsets).enumerate() {
        clock::sleep_until(start + offset);
        let now = clock::now_ns();
        let stamp = match prev_stamp {
            Some(p) if now <= p => p + 1,
            _ => now,
        };
        prev_stamp = Some(stamp);
        let id = id as u64;
        ledger.entries.push(LedgerEntry {
            id,
            origin_stamp: stamp,
            topic,
        });
        graph.publish(topic, MessageEnvelope::new(id, stamp, record.payload.clone()))?;
    }
    ledger.end_ns = prev_stamp.unwrap_or(start);
    if let PlaybackMode::FixedRate { hz } = policy.mode {
        let span = (ledger.entries.len() as f64 * 1e9 / hz).round() as u64;
        ledger.end_ns = ledger.end_ns.max(start + span);
    }
    Ok(ledger)
}
