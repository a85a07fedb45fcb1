use std::collections::BTreeMap;

use graphperf::metrics::LatencySample;
use graphperf::par::ExecMode;
use graphperf::tracer::{
    greybox_latencies, read_names, read_trace, read_trace_bytes, subject_hash, write_trace_bytes,
    EventType, TraceError, TraceEvent, Tracer,
};
use proptest::prelude::*;

const SRC: u64 = 0xA;
const SINK: u64 = 0xB;
const OTHER: u64 = 0xC;

/// Independent O(n²) pairing: for every source publish id, scan the whole
/// list for the earliest publish and the earliest sink end of that id.
fn oracle(events: &[TraceEvent], warmup: u64) -> Result<(Vec<(u64, u64)>, u64), u64> {
    let mut ids: Vec<u64> = events
        .iter()
        .filter(|e| e.event_type == EventType::Publish && e.subject_hash == SRC)
        .map(|e| e.message_id)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let mut samples = Vec::new();
    let mut lost = 0;
    for id in ids {
        if id < warmup {
            continue;
        }
        let mut publish = u64::MAX;
        let mut end = None::<u64>;
        for e in events {
            if e.message_id != id {
                continue;
            }
            if e.event_type == EventType::Publish && e.subject_hash == SRC {
                publish = publish.min(e.timestamp);
            }
            if e.event_type == EventType::CallbackEnd && e.subject_hash == SINK {
                end = Some(end.map_or(e.timestamp, |t: u64| t.min(e.timestamp)));
            }
        }
        match end {
            Some(t) if t < publish => return Err(id),
            Some(t) => samples.push((id, t - publish)),
            None => lost += 1,
        }
    }
    Ok((samples, lost))
}

fn arb_event() -> impl Strategy<Value = TraceEvent> {
    (
        prop::sample::select(vec![
            EventType::Publish,
            EventType::CallbackStart,
            EventType::CallbackEnd,
            EventType::UserProbe,
        ]),
        0u32..4,
        0u64..5_000,
        0u64..24,
        prop::sample::select(vec![SRC, SINK, OTHER]),
    )
        .prop_map(|(event_type, thread_id, timestamp, message_id, subject_hash)| TraceEvent {
            event_type,
            thread_id,
            timestamp,
            message_id,
            subject_hash,
        })
}

/// Traces where sinks finish after their publish, so most cases pair.
fn causal_trace() -> impl Strategy<Value = Vec<TraceEvent>> {
    prop::collection::vec((0u64..30, 0u64..10_000, 0u64..5_000, any::<bool>(), any::<bool>()), 0..60).prop_map(
        |msgs| {
            let mut events = Vec::new();
            for (id, publish, delay, delivered, noise) in msgs {
                let ev = |event_type, timestamp, subject_hash| TraceEvent {
                    event_type,
                    thread_id: (id % 3) as u32,
                    timestamp,
                    message_id: id,
                    subject_hash,
                };
                events.push(ev(EventType::Publish, publish, SRC));
                if delivered {
                    events.push(ev(EventType::CallbackStart, publish + delay / 2, SINK));
                    events.push(ev(EventType::CallbackEnd, publish + delay, SINK));
                }
                if noise {
                    events.push(ev(EventType::CallbackEnd, publish + delay + 1, OTHER));
                }
            }
            events.sort_by_key(|e| (e.timestamp, e.thread_id));
            events.truncate(200);
            events
        },
    )
}

fn check(events: &[TraceEvent], warmup: u64) -> Result<(), TestCaseError> {
    let got = greybox_latencies(events, SRC, SINK, warmup);
    match (oracle(events, warmup), got) {
        (Ok((samples, lost)), Ok(r)) => {
            let pairs: Vec<(u64, u64)> = r.samples.iter().map(|s: &LatencySample| (s.message_id, s.latency_ns)).collect();
            prop_assert_eq!(pairs, samples);
            prop_assert_eq!(r.lost, lost);
            prop_assert_eq!(r.considered, r.samples.len() as u64 + r.lost);
        }
        (Err(id), Err(TraceError::NegativeLatency { message_id })) => prop_assert_eq!(id, message_id),
        (want, got) => prop_assert!(false, "oracle {:?} vs {:?}", want, got),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn greybox_matches_oracle_on_random_events(mut events in prop::collection::vec(arb_event(), 0..200), warmup in 0u64..6) {
        events.sort_by_key(|e| (e.timestamp, e.thread_id));
        check(&events, warmup)?;
    }

    #[test]
    fn greybox_matches_oracle_on_causal_traces(events in causal_trace(), warmup in 0u64..6) {
        check(&events, warmup)?;
    }

    #[test]
    fn trace_bytes_round_trip(mut events in prop::collection::vec(arb_event(), 0..100)) {
        events.sort_by_key(|e| (e.timestamp, e.thread_id));
        let bytes = write_trace_bytes(&events);
        let back = read_trace_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.events, &events);
        prop_assert_eq!(write_trace_bytes(&back.events), bytes);
    }
}

#[test]
fn three_node_chain_trace_matches_oracle() {
    // 50 messages through src -> n1 -> n2 -> sink, synthetic timing.
    let mut events = Vec::new();
    for id in 0..50u64 {
        let t0 = id * 1_000;
        let ev = |event_type, timestamp, subject_hash, thread_id| TraceEvent {
            event_type,
            thread_id,
            timestamp,
            message_id: id,
            subject_hash,
        };
        events.push(ev(EventType::Publish, t0, SRC, 0));
        events.push(ev(EventType::CallbackStart, t0 + 10, OTHER, 1));
        events.push(ev(EventType::CallbackEnd, t0 + 100 + id, OTHER, 1));
        events.push(ev(EventType::CallbackStart, t0 + 150 + id, SINK, 2));
        events.push(ev(EventType::CallbackEnd, t0 + 300 + 2 * id, SINK, 2));
    }
    events.sort_by_key(|e| (e.timestamp, e.thread_id));
    let r = greybox_latencies(&events, SRC, SINK, 0).unwrap();
    let (samples, lost) = oracle(&events, 0).unwrap();
    assert_eq!(lost, 0);
    assert_eq!(r.samples.len(), 50);
    for (s, (id, lat)) in r.samples.iter().zip(samples) {
        assert_eq!((s.message_id, s.latency_ns), (id, lat));
        assert_eq!(lat, 300 + 2 * id);
    }
}

#[test]
fn single_publish_and_sink_pair() {
    let events = [
        TraceEvent { event_type: EventType::Publish, thread_id: 0, timestamp: 1_000, message_id: 7, subject_hash: SRC },
        TraceEvent { event_type: EventType::CallbackEnd, thread_id: 1, timestamp: 4_000, message_id: 7, subject_hash: SINK },
    ];
    let r = greybox_latencies(&events, SRC, SINK, 0).unwrap();
    assert_eq!(r.samples[0].latency_ns, 3_000);
}

#[test]
fn disabled_tracer_records_nothing() {
    let t = Tracer::new(16, false);
    for i in 0..10 {
        t.emit(EventType::Publish, i, 1);
    }
    let c = t.counts();
    assert_eq!((c.retained, c.overflowed), (0, 0));
}

#[test]
fn small_ring_counts_overflow() {
    let t = Tracer::enabled(4);
    for i in 0..6 {
        t.emit(EventType::Publish, i, 1);
    }
    let c = t.counts();
    assert_eq!((c.retained, c.overflowed), (4, 2));
    // Drop-newest: the four earliest events survive.
    let ids: Vec<u64> = t.snapshot(ExecMode::Sequential).iter().map(|e| e.message_id).collect();
    assert_eq!(ids, [0, 1, 2, 3]);
}

#[test]
fn concurrent_emits_are_all_accounted() {
    let t = Tracer::enabled(2_000);
    std::thread::scope(|s| {
        for _ in 0..4 {
            let t = t.clone();
            s.spawn(move || {
                for i in 0..2_500 {
                    t.emit(EventType::UserProbe, i, 9);
                }
            });
        }
    });
    let c = t.counts();
    assert_eq!(c.retained + c.overflowed, 10_000);
    assert_eq!(c.threads, 4);
    assert_eq!(c.overflowed, 4 * 500);
}

#[test]
fn flush_merges_threads_in_time_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.gpt");
    let t = Tracer::enabled(1_000);
    let node = t.register_name("node");
    std::thread::scope(|s| {
        for _ in 0..3 {
            let t = t.clone();
            s.spawn(move || {
                for i in 0..100 {
                    t.emit(EventType::CallbackStart, i, node);
                }
            });
        }
    });
    let summary = t.flush(&path).unwrap();
    assert_eq!(summary.event_count, 300);
    assert_eq!(summary.overflow_total, 0);
    let read = read_trace(&path).unwrap();
    assert_eq!(read.events.len(), 300);
    assert!(read
        .events
        .windows(2)
        .all(|w| (w[0].timestamp, w[0].thread_id) <= (w[1].timestamp, w[1].thread_id)));
    let names: BTreeMap<u64, String> = read_names(&path).unwrap();
    assert_eq!(names.get(&subject_hash("node")).map(String::as_str), Some("node"));
}

#[test]
fn equal_timestamps_break_ties_by_thread() {
    let events = vec![
        TraceEvent { event_type: EventType::UserProbe, thread_id: 2, timestamp: 5, message_id: 0, subject_hash: 1 },
        TraceEvent { event_type: EventType::UserProbe, thread_id: 1, timestamp: 5, message_id: 0, subject_hash: 1 },
    ];
    let mut sorted = events.clone();
    graphperf::par::sort_by_key(ExecMode::default(), &mut sorted, |e| (e.timestamp, e.thread_id));
    assert_eq!(sorted[0].thread_id, 1);
}

#[test]
fn empty_flush_has_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.gpt");
    let s = Tracer::enabled(8).flush(&path).unwrap();
    assert_eq!(s.event_count, 0);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 16);
    assert!(read_trace(&path).unwrap().events.is_empty());
}

#[test]
fn emit_is_cheap() {
    let t = Tracer::enabled(1 << 20);
    let n = 1_000_000u64;
    let start = std::time::Instant::now();
    for i in 0..n {
        t.emit(EventType::UserProbe, i, 3);
    }
    let per = start.elapsed().as_nanos() as f64 / n as f64;
    assert!(per < 1_000.0, "mean emit cost {per} ns");
}
