//! Grey-box instrumentation: per-thread trace rings, a binary trace file
//! format, and offline latency reconstruction.
//!
//! Each emitting thread owns one fixed-capacity ring and is its only writer,
//! so [`Tracer::emit`] never takes a lock on the hot path. Rings are merged
//! into a single timestamp-ordered stream only at [`Tracer::flush`] time,
//! which requires the executor to be quiescent.

mod analysis;
mod format;

pub use analysis::{greybox_latencies, GreyBoxResult};
pub use format::{
    names_sidecar_path, read_names, read_trace, read_trace_bytes, write_trace, write_trace_bytes,
    TraceReadout, TraceWarning, TRACE_MAGIC, TRACE_RECORD_SIZE, TRACE_VERSION,
};

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::clock;
use crate::par::{self, ExecMode};

/// Default per-thread ring capacity (32 MiB of 32-byte records).
pub const DEFAULT_RING_CAPACITY: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("bad trace magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported trace version {0}")]
    UnsupportedVersion(u32),
    #[error("trace truncated: expected {expected} bytes, found {found}")]
    TruncatedRecord { expected: usize, found: usize },
    #[error("{0} unexpected bytes after the last trace record")]
    TrailingBytes(usize),
    #[error("unknown event type {0} at record {1}")]
    UnknownEventType(u16, usize),
    #[error("negative latency for message {message_id}: sink event precedes publish")]
    NegativeLatency { message_id: u64 },
    #[error("malformed names sidecar: {0}")]
    Names(#[from] serde_yaml::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[repr(u16)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    Publish = 1,
    CallbackStart = 2,
    CallbackEnd = 3,
    UserProbe = 4,
}

impl EventType {
    pub fn from_u16(raw: u16) -> Option<Self> {
        match raw {
            1 => Some(EventType::Publish),
            2 => Some(EventType::CallbackStart),
            3 => Some(EventType::CallbackEnd),
            4 => Some(EventType::UserProbe),
            _ => None,
        }
    }
}

/// One substrate event. Serialized as a fixed 32-byte record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub event_type: EventType,
    pub thread_id: u32,
    pub timestamp: u64,
    /// Envelope id; 0 for id-less user probes.
    pub message_id: u64,
    /// FNV-1a hash of the node or topic name.
    pub subject_hash: u64,
}

/// 64-bit FNV-1a hash of a node, topic or probe label.
pub fn subject_hash(name: &str) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(name.as_bytes());
    h.finish()
}

/// Append-only single-writer buffer.
///
/// The owning thread writes slot `len` and then publishes it with a release
/// store; readers only look at `[0, len)`.
struct Ring {
    thread_id: u32,
    ptr: *mut TraceEvent,
    capacity: usize,
    len: AtomicUsize,
    overflow: AtomicU64,
}

// SAFETY: only the registering thread writes through `ptr`, and only into
// slots beyond the published `len`; readers never touch those slots.
unsafe impl Send for Ring {}
unsafe impl Sync for Ring {}

impl Ring {
    fn new(thread_id: u32, capacity: usize) -> Self {
        let mut buf = Vec::<TraceEvent>::with_capacity(capacity);
        let ptr = buf.as_mut_ptr();
        let capacity = buf.capacity();
        std::mem::forget(buf);
        Ring {
            thread_id,
            ptr,
            capacity,
            len: AtomicUsize::new(0),
            overflow: AtomicU64::new(0),
        }
    }

    #[inline]
    fn push(&self, event: TraceEvent, limit: usize) {
        let len = self.len.load(Ordering::Relaxed);
        if len >= limit {
            self.overflow.fetch_add(1, Ordering::Relaxed);
            return;
        }
        // SAFETY: len < limit <= capacity and this thread is the sole writer.
        unsafe { self.ptr.add(len).write(event) };
        self.len.store(len + 1, Ordering::Release);
    }

    fn snapshot(&self) -> &[TraceEvent] {
        let len = self.len.load(Ordering::Acquire);
        // SAFETY: slots [0, len) were fully written before `len` was published.
        unsafe { std::slice::from_raw_parts(self.ptr, len) }
    }
}

impl Drop for Ring {
    fn drop(&mut self) {
        let len = *self.len.get_mut();
        // SAFETY: reconstructs the Vec leaked in `Ring::new`.
        drop(unsafe { Vec::from_raw_parts(self.ptr, len, self.capacity) });
    }
}

struct TracerShared {
    id: u64,
    enabled: AtomicBool,
    capacity: usize,
    next_thread: AtomicU32,
    rings: Mutex<Vec<Arc<Ring>>>,
    names: Mutex<BTreeMap<u64, String>>,
}

static NEXT_TRACER_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static LOCAL_RINGS: RefCell<Vec<(u64, Arc<Ring>)>> = const { RefCell::new(Vec::new()) };
}

/// Per-run counters reported alongside a flushed trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceCounts {
    pub retained: u64,
    pub overflowed: u64,
    pub threads: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFileSummary {
    pub path: PathBuf,
    pub event_count: u64,
    pub overflow_total: u64,
    pub threads: u32,
}

/// Handle to a set of per-thread trace rings. Cheap to clone.
#[derive(Clone)]
pub struct Tracer {
    shared: Arc<TracerShared>,
}

impl std::fmt::Debug for Tracer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracer")
            .field("id", &self.shared.id)
            .field("enabled", &self.is_enabled())
            .field("capacity", &self.shared.capacity)
            .finish()
    }
}

impl Tracer {
    pub fn new(capacity: usize, enabled: bool) -> Self {
        Tracer {
            shared: Arc::new(TracerShared {
                id: NEXT_TRACER_ID.fetch_add(1, Ordering::Relaxed),
                enabled: AtomicBool::new(enabled),
                capacity,
                next_thread: AtomicU32::new(1),
                rings: Mutex::new(Vec::new()),
                names: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    pub fn enabled(capacity: usize) -> Self {
        Self::new(capacity, true)
    }

    pub fn disabled() -> Self {
        Self::new(DEFAULT_RING_CAPACITY, false)
    }

    pub fn is_enabled(&self) -> bool {
        self.shared.enabled.load(Ordering::Relaxed)
    }

    /// Toggle emission. Only call between runs.
    pub fn set_enabled(&self, enabled: bool) {
        self.shared.enabled.store(enabled, Ordering::Relaxed);
    }

    pub fn capacity(&self) -> usize {
        self.shared.capacity
    }

    /// Record `name` in the sidecar table and return its subject hash.
    pub fn register_name(&self, name: &str) -> u64 {
        let hash = subject_hash(name);
        self.shared
            .names
            .lock()
            .unwrap()
            .entry(hash)
            .or_insert_with(|| name.to_owned());
        hash
    }

    pub fn names(&self) -> BTreeMap<u64, String> {
        self.shared.names.lock().unwrap().clone()
    }

    /// Stamp and record one event on the calling thread's ring.
    #[inline]
    pub fn emit(&self, event_type: EventType, message_id: u64, subject_hash: u64) {
        if !self.shared.enabled.load(Ordering::Relaxed) {
            return;
        }
        self.with_ring(|ring| {
            ring.push(
                TraceEvent {
                    event_type,
                    thread_id: ring.thread_id,
                    timestamp: clock::now_ns(),
                    message_id,
                    subject_hash,
                },
                self.shared.capacity,
            )
        });
    }

    /// Emit a user probe labelled by `label_hash` (see [`Tracer::register_name`]).
    pub fn probe(&self, label_hash: u64) {
        self.emit(EventType::UserProbe, 0, label_hash);
    }

    #[inline]
    fn with_ring<F: FnOnce(&Ring)>(&self, f: F) {
        let id = self.shared.id;
        let _ = LOCAL_RINGS.try_with(|cell| {
            let mut local = cell.borrow_mut();
            if let Some((_, ring)) = local.iter().find(|(tid, _)| *tid == id) {
                f(ring);
                return;
            }
            // First emit from this thread: allocate its ring once and drop
            // entries whose tracer has since been dropped.
            local.retain(|(_, ring)| Arc::strong_count(ring) > 1);
            let thread_id = self.shared.next_thread.fetch_add(1, Ordering::Relaxed);
            let ring = Arc::new(Ring::new(thread_id, self.shared.capacity));
            self.shared.rings.lock().unwrap().push(Arc::clone(&ring));
            f(&ring);
            local.push((id, ring));
        });
    }

    pub fn counts(&self) -> TraceCounts {
        let rings = self.shared.rings.lock().unwrap();
        let mut counts = TraceCounts {
            threads: rings.len() as u32,
            ..Default::default()
        };
        for ring in rings.iter() {
            counts.retained += ring.len.load(Ordering::Acquire) as u64;
            counts.overflowed += ring.overflow.load(Ordering::Relaxed);
        }
        counts
    }

    pub fn overflow_total(&self) -> u64 {
        self.counts().overflowed
    }

    /// All retained events merged and ordered by (timestamp, thread_id).
    ///
    /// Requires quiescence: events emitted concurrently may or may not appear.
    pub fn snapshot(&self, mode: ExecMode) -> Vec<TraceEvent> {
        let rings = self.shared.rings.lock().unwrap();
        let total = rings.iter().map(|r| r.snapshot().len()).sum();
        let mut events = Vec::with_capacity(total);
        for ring in rings.iter() {
            events.extend_from_slice(ring.snapshot());
        }
        drop(rings);
        par::sort_by_key(mode, &mut events, |e| (e.timestamp, e.thread_id));
        events
    }

    /// Write every retained event plus the names sidecar.
    pub fn flush(&self, path: &Path) -> Result<TraceFileSummary, TraceError> {
        let events = self.snapshot(ExecMode::default());
        write_trace(path, &events)?;
        let names = self.names();
        std::fs::write(names_sidecar_path(path), serde_yaml::to_string(&names)?)?;
        let counts = self.counts();
        Ok(TraceFileSummary {
            path: path.to_path_buf(),
            event_count: events.len() as u64,
            overflow_total: counts.overflowed,
            threads: counts.threads,
        })
    }

    /// Forget all recorded events and overflow counts. Requires quiescence.
    pub fn clear(&self) {
        for ring in self.shared.rings.lock().unwrap().iter() {
            ring.len.store(0, Ordering::Release);
            ring.overflow.store(0, Ordering::Relaxed);
        }
    }
}
