//! Binary trace file: little-endian, `GPT1` magic, u32 version, u64 count,
//! then fixed 32-byte records. Subject names live in a YAML sidecar.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use super::{EventType, TraceError, TraceEvent};

pub const TRACE_MAGIC: [u8; 4] = *b"GPT1";
pub const TRACE_VERSION: u32 = 1;
pub const TRACE_RECORD_SIZE: usize = 32;
const HEADER_SIZE: usize = 16;

/// Invariant violations found while reading. Reported, never fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceWarning {
    /// A thread's timestamps went backwards at this record.
    NonMonotonicThread { index: usize, thread_id: u32 },
    /// CALLBACK_END without a matching open CALLBACK_START on the same
    /// thread and subject.
    UnpairedEnd {
        index: usize,
        thread_id: u32,
        message_id: u64,
    },
    NonZeroReserved { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceReadout {
    pub events: Vec<TraceEvent>,
    pub warnings: Vec<TraceWarning>,
}

pub fn names_sidecar_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".names.yaml");
    PathBuf::from(s)
}

pub fn write_trace_bytes(events: &[TraceEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_SIZE + events.len() * TRACE_RECORD_SIZE);
    out.extend_from_slice(&TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for e in events {
        out.extend_from_slice(&(e.event_type as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&e.thread_id.to_le_bytes());
        out.extend_from_slice(&e.timestamp.to_le_bytes());
        out.extend_from_slice(&e.message_id.to_le_bytes());
        out.extend_from_slice(&e.subject_hash.to_le_bytes());
    }
    out
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<(), TraceError> {
    std::fs::write(path, write_trace_bytes(events))?;
    Ok(())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes(b[at..at + 2].try_into().unwrap())
}
fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}
fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn read_trace_bytes(bytes: &[u8]) -> Result<TraceReadout, TraceError> {
    if bytes.len() < 4 {
        return Err(TraceError::TruncatedRecord {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != TRACE_MAGIC {
        return Err(TraceError::BadMagic(magic));
    }
    if bytes.len() < HEADER_SIZE {
        return Err(TraceError::TruncatedRecord {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let version = u32_at(bytes, 4);
    if version != TRACE_VERSION {
        return Err(TraceError::UnsupportedVersion(version));
    }
    let count = u64_at(bytes, 8) as usize;
    let expected = count
        .checked_mul(TRACE_RECORD_SIZE)
        .and_then(|n| n.checked_add(HEADER_SIZE))
        .unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(TraceError::TruncatedRecord {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(TraceError::TrailingBytes(bytes.len() - expected));
    }

    let mut events = Vec::with_capacity(count);
    let mut warnings = Vec::new();
    for (index, rec) in bytes[HEADER_SIZE..].chunks_exact(TRACE_RECORD_SIZE).enumerate() {
        let raw_type = u16_at(rec, 0);
        let event_type =
            EventType::from_u16(raw_type).ok_or(TraceError::UnknownEventType(raw_type, index))?;
        if u16_at(rec, 2) != 0 {
            warnings.push(TraceWarning::NonZeroReserved { index });
        }
        events.push(TraceEvent {
            event_type,
            thread_id: u32_at(rec, 4),
            timestamp: u64_at(rec, 8),
            message_id: u64_at(rec, 16),
            subject_hash: u64_at(rec, 24),
        });
    }
    warnings.extend(check_invariants(&events));
    Ok(TraceReadout { events, warnings })
}

pub fn read_trace(path: &Path) -> Result<TraceReadout, TraceError> {
    read_trace_bytes(&std::fs::read(path)?)
}

pub fn read_names(trace: &Path) -> Result<BTreeMap<u64, String>, TraceError> {
    let text = std::fs::read_to_string(names_sidecar_path(trace))?;
    Ok(serde_yaml::from_str(&text)?)
}

fn check_invariants(events: &[TraceEvent]) -> Vec<TraceWarning> {
    let mut warnings = Vec::new();
    let mut last_stamp: HashMap<u32, u64> = HashMap::new();
    let mut open: HashMap<(u32, u64), Vec<u64>> = HashMap::new();
    for (index, e) in events.iter().enumerate() {
        let prev = last_stamp.entry(e.thread_id).or_insert(e.timestamp);
        if e.timestamp < *prev {
            warnings.push(TraceWarning::NonMonotonicThread {
                index,
                thread_id: e.thread_id,
            });
        }
        *prev = (*prev).max(e.timestamp);

        match e.event_type {
            EventType::CallbackStart => open
                .entry((e.thread_id, e.subject_hash))
                .or_default()
                .push(e.message_id),
            EventType::CallbackEnd => {
                let stack = open.entry((e.thread_id, e.subject_hash)).or_default();
                match stack.iter().rposition(|id| *id == e.message_id) {
                    Some(pos) => {
                        stack.remove(pos);
                    }
                    None => warnings.push(TraceWarning::UnpairedEnd {
                        index,
                        thread_id: e.thread_id,
                        message_id: e.message_id,
                    }),
                }
            }
            _ => {}
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(event_type: EventType, thread_id: u32, timestamp: u64, message_id: u64) -> TraceEvent {
        TraceEvent {
            event_type,
            thread_id,
            timestamp,
            message_id,
            subject_hash: 42,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let bytes = write_trace_bytes(&[]);
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], b"GPT1");
        let r = read_trace_bytes(&bytes).unwrap();
        assert!(r.events.is_empty());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn record_layout_is_fixed() {
        let bytes = write_trace_bytes(&[TraceEvent {
            event_type: EventType::CallbackEnd,
            thread_id: 0x0102_0304,
            timestamp: 5,
            message_id: 6,
            subject_hash: 7,
        }]);
        assert_eq!(bytes.len(), 48);
        assert_eq!(&bytes[16..20], &[3, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &[4, 3, 2, 1]);
        assert_eq!(bytes[24], 5);
        assert_eq!(bytes[32], 6);
        assert_eq!(bytes[40], 7);
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(read_trace_bytes(b"XXXX\x01\0\0\0"), Err(TraceError::BadMagic(_))));
    }

    #[test]
    fn cut_mid_record_is_truncated() {
        let events = vec![ev(EventType::Publish, 1, 1, 1), ev(EventType::Publish, 1, 2, 2)];
        let bytes = write_trace_bytes(&events);
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(read_trace_bytes(cut), Err(TraceError::TruncatedRecord { .. })));
    }

    #[test]
    fn unpaired_end_is_a_warning() {
        let events = vec![
            ev(EventType::CallbackStart, 1, 10, 3),
            ev(EventType::CallbackEnd, 1, 20, 3),
            ev(EventType::CallbackEnd, 1, 30, 4),
        ];
        let r = read_trace_bytes(&write_trace_bytes(&events)).unwrap();
        assert_eq!(r.events, events);
        assert_eq!(
            r.warnings,
            vec![TraceWarning::UnpairedEnd {
                index: 2,
                thread_id: 1,
                message_id: 4
            }]
        );
    }

    #[test]
    fn end_on_other_thread_is_unpaired() {
        let events = vec![
            ev(EventType::CallbackStart, 1, 10, 3),
            ev(EventType::CallbackEnd, 2, 20, 3),
        ];
        let r = read_trace_bytes(&write_trace_bytes(&events)).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn backwards_thread_clock_is_a_warning() {
        let events = vec![ev(EventType::Publish, 1, 10, 1), ev(EventType::Publish, 1, 5, 2)];
        let r = read_trace_bytes(&write_trace_bytes(&events)).unwrap();
        assert_eq!(
            r.warnings,
            vec![TraceWarning::NonMonotonicThread {
                index: 1,
                thread_id: 1
            }]
        );
    }

    #[test]
    fn unknown_event_type_is_rejected() {
        let mut bytes = write_trace_bytes(&[ev(EventType::Publish, 1, 1, 1)]);
        bytes[16] = 9;
        assert!(matches!(
            read_trace_bytes(&bytes),
            Err(TraceError::UnknownEventType(9, 0))
        ));
    }
}
