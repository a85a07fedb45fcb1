//! Recorded message log (`GPL1`), the replayable input of a benchmark.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! magic "GPL1"
//! u32 topic count, then per topic: u32 id, u32 name length, name bytes
//! u64 record count, then per record: u32 topic id, u64 recorded_stamp_ns,
//!                                    u32 payload length, payload bytes
//! ```

use std::collections::HashSet;
use std::path::Path;

use bytes::Bytes;
use thiserror::Error;

use crate::pubsub::TopicId;

pub const LOG_MAGIC: [u8; 4] = *b"GPL1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("bad log magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("log truncated at byte {offset} while reading {what}")]
    TruncatedRecord { offset: usize, what: &'static str },
    #[error("record {index} has stamp {stamp} earlier than its predecessor")]
    UnsortedTimestamps { index: usize, stamp: u64 },
    #[error("record {index} references topic {topic} missing from the topic table")]
    UnknownTopic { index: usize, topic: TopicId },
    #[error("topic table entry {0:?} is duplicated")]
    DuplicateTopic(String),
    #[error("topic name is not valid UTF-8")]
    BadTopicName,
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(usize),
    #[error("{what} does not fit the format's {bits}-bit field")]
    TooLarge { what: &'static str, bits: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub topic: TopicId,
    pub recorded_stamp: u64,
    pub payload: Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MessageLog {
    pub topics: Vec<(String, TopicId)>,
    pub records: Vec<LogRecord>,
}

impl MessageLog {
    pub fn topic_name(&self, topic: TopicId) -> Option<&str> {
        self.topics
            .iter()
            .find(|(_, id)| *id == topic)
            .map(|(n, _)| n.as_str())
    }

    pub fn topic_id(&self, name: &str) -> Option<TopicId> {
        self.topics.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }

    pub fn validate(&self) -> Result<(), LogError> {
        let mut names = HashSet::new();
        let mut ids = HashSet::new();
        for (name, id) in &self.topics {
            if !names.insert(name.as_str()) || !ids.insert(*id) {
                return Err(LogError::DuplicateTopic(name.clone()));
            }
        }
        let mut prev = 0u64;
        for (index, r) in self.records.iter().enumerate() {
            if !ids.contains(&r.topic) {
                return Err(LogError::UnknownTopic {
                    index,
                    topic: r.topic,
                });
            }
            if r.recorded_stamp < prev {
                return Err(LogError::UnsortedTimestamps {
                    index,
                    stamp: r.recorded_stamp,
                });
            }
            prev = r.recorded_stamp;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, LogError> {
        self.validate()?;
        let u32_len = |n: usize, what| {
            u32::try_from(n).map_err(|_| LogError::TooLarge { what, bits: 32 })
        };
        let payload_bytes: usize = self.records.iter().map(|r| r.payload.len()).sum();
        let mut out = Vec::with_capacity(16 + self.records.len() * 16 + payload_bytes);
        out.extend_from_slice(&LOG_MAGIC);
        out.extend_from_slice(&u32_len(self.topics.len(), "topic count")?.to_le_bytes());
        for (name, id) in &self.topics {
            out.extend_from_slice(&id.0.to_le_bytes());
            out.extend_from_slice(&u32_len(name.len(), "topic name")?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.topic.0.to_le_bytes());
            out.extend_from_slice(&r.recorded_stamp.to_le_bytes());
            out.extend_from_slice(&u32_len(r.payload.len(), "payload")?.to_le_bytes());
            out.extend_from_slice(&r.payload);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<MessageLog, LogError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != LOG_MAGIC {
            return Err(LogError::BadMagic(magic.to_vec()));
        }
        let topic_count = cur.u32("topic count")?;
        let mut topics = Vec::new();
        for _ in 0..topic_count {
            let id = TopicId(cur.u32("topic id")?);
            let len = cur.u32("topic name length")? as usize;
            let name = std::str::from_utf8(cur.take(len, "topic name")?)
                .map_err(|_| LogError::BadTopicName)?;
            topics.push((name.to_owned(), id));
        }
        let record_count = cur.u64("record count")?;
        let mut records = Vec::new();
        for _ in 0..record_count {
            let topic = TopicId(cur.u32("record topic")?);
            let recorded_stamp = cur.u64("record stamp")?;
            let len = cur.u32("payload length")? as usize;
            let payload = Bytes::copy_from_slice(cur.take(len, "payload")?);
            records.push(LogRecord {
                topic,
                recorded_stamp,
                payload,
            });
        }
        if cur.pos != bytes.len() {
            return Err(LogError::TrailingBytes(bytes.len() - cur.pos));
        }
        let log = MessageLog { topics, records };
        log.validate()?;
        Ok(log)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], LogError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(LogError::TruncatedRecord {
                offset: self.pos,
                what,
            }),
        }
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, LogError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, LogError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Read a log fully into memory (the data-loader step; excluded from metrics).
pub fn load_log(path: &Path) -> Result<MessageLog, LogError> {
    MessageLog::from_bytes(&std::fs::read(path)?)
}

pub fn write_log(log: &MessageLog, path: &Path) -> Result<(), LogError> {
    std::fs::write(path, log.to_bytes()?)?;
    Ok(())
}
