use bytes::Bytes;

/// Harness-owned wrapper around a payload.
///
/// `id` and `origin_stamp` are assigned by the playback node and must be
/// copied unchanged onto every output a workload derives from this message;
/// [`MessageEnvelope::derive`] does exactly that.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageEnvelope {
    pub id: u64,
    /// Monotonic nanoseconds at the playback publish.
    pub origin_stamp: u64,
    pub payload: Bytes,
}

impl MessageEnvelope {
    pub fn new(id: u64, origin_stamp: u64, payload: impl Into<Bytes>) -> Self {
        MessageEnvelope {
            id,
            origin_stamp,
            payload: payload.into(),
        }
    }

    /// An output envelope carrying this message's id and origin stamp.
    pub fn derive(&self, payload: impl Into<Bytes>) -> Self {
        MessageEnvelope {
            id: self.id,
            origin_stamp: self.origin_stamp,
            payload: payload.into(),
        }
    }
}
