use std::time::Duration;

use bytes::Bytes;
use graphperf::harness::{
    blackbox_latencies, load_log, monitor_collect, playback, write_log, HarnessError, LedgerEntry,
    LogError, LogRecord, MessageLog, MonitorNode, MonitorRecord, PlaybackLedger, PlaybackPolicy,
};
use graphperf::pubsub::{build_graph, Graph, GraphConfig, StopCondition, TopicId};
use graphperf::workloads::{instantiate, NodeWiring, WorkloadKind, WorkloadSpec};
use proptest::prelude::*;

fn log(n: usize, period_ns: u64) -> MessageLog {
    MessageLog {
        topics: vec![("in".into(), TopicId(0))],
        records: (0..n)
            .map(|i| LogRecord {
                topic: TopicId(0),
                recorded_stamp: i as u64 * period_ns,
                payload: Bytes::from(vec![i as u8; 4]),
            })
            .collect(),
    }
}

/// in -> worker(kind) -> out -> monitor
fn pipeline(kind: WorkloadKind) -> (Graph, MonitorNode, TopicId) {
    let mut config = GraphConfig::new(2);
    let input = config.add_topic("in");
    let out = config.add_topic("out");
    let spec = WorkloadSpec::new(kind, 1);
    config.add_node(instantiate(&spec, "worker", &NodeWiring::chain(input, out)).unwrap());
    let monitor = MonitorNode::new();
    config.add_node(monitor.descriptor("monitor", &[out]));
    (build_graph(config).unwrap(), monitor, input)
}

fn run(graph: &Graph, log: &MessageLog, policy: &PlaybackPolicy, sources: &[TopicId]) -> PlaybackLedger {
    let guard = graph.register_producer();
    std::thread::scope(|s| {
        let g = graph.clone();
        let exec = s.spawn(move || g.run_executor(StopCondition::DrainedOrTimeout(Duration::from_secs(20))));
        let ledger = playback(log, policy, graph, sources).unwrap();
        drop(guard);
        let stats = exec.join().unwrap().unwrap();
        assert!(!stats.timed_out);
        ledger
    })
}

#[test]
fn empty_log_gives_empty_ledger() {
    let (graph, monitor, input) = pipeline(WorkloadKind::PassThrough);
    let ledger = run(&graph, &log(0, 0), &PlaybackPolicy::default(), &[input]);
    assert!(ledger.is_empty());
    assert!(monitor_collect(&monitor).records.is_empty());
}

#[test]
fn message_limit_caps_the_ledger() {
    let (graph, _, input) = pipeline(WorkloadKind::PassThrough);
    let policy = PlaybackPolicy::default().with_limit(4).with_warmup(0);
    let ledger = run(&graph, &log(10, 1), &policy, &[input]);
    let ids: Vec<u64> = ledger.entries.iter().map(|e| e.id).collect();
    assert_eq!(ids, [0, 1, 2, 3]);
}

#[test]
fn unknown_source_topic() {
    let (graph, _, _) = pipeline(WorkloadKind::PassThrough);
    let err = playback(&log(1, 0), &PlaybackPolicy::default(), &graph, &[TopicId(77)]).unwrap_err();
    assert!(matches!(err, HarnessError::UnknownSourceTopic(TopicId(77))));
}

#[test]
fn bad_policy_is_rejected() {
    assert!(PlaybackPolicy::fixed_rate(0.0).validate().is_err());
    assert!(PlaybackPolicy::default().with_limit(5).with_warmup(5).validate().is_err());
    let p: Result<PlaybackPolicy, _> = serde_yaml::from_str("mode: fixed_rate\n");
    assert!(p.is_err());
    let p: PlaybackPolicy = serde_yaml::from_str("mode: fixed_rate\nhz: 20.0\nmessage_limit: 50\n").unwrap();
    assert_eq!(p, PlaybackPolicy::fixed_rate(20.0).with_limit(50));
}

#[test]
fn pass_through_delivers_every_id() {
    let (graph, monitor, input) = pipeline(WorkloadKind::PassThrough);
    let ledger = run(&graph, &log(10, 0), &PlaybackPolicy::default().with_warmup(0), &[input]);
    let got = monitor_collect(&monitor);
    assert_eq!(got.records.iter().map(|r| r.id).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    assert_eq!(got.duplicate_count, 0);
    assert!(ledger.entries.windows(2).all(|w| w[0].origin_stamp < w[1].origin_stamp));
    let r = blackbox_latencies(&ledger, &got.records, 0).unwrap();
    assert_eq!((r.matched, r.lost, r.considered), (10, 0, 10));
}

#[test]
fn dropping_odd_ids_halves_delivery() {
    let (graph, monitor, input) = pipeline(WorkloadKind::DropOdd);
    let ledger = run(&graph, &log(10, 0), &PlaybackPolicy::default().with_warmup(0), &[input]);
    let got = monitor_collect(&monitor);
    assert_eq!(got.records.iter().map(|r| r.id).collect::<Vec<_>>(), [0, 2, 4, 6, 8]);
    let r = blackbox_latencies(&ledger, &got.records, 0).unwrap();
    assert_eq!(r.loss_rate, 0.5);
    assert_eq!(r.matched + r.lost, r.considered);
}

#[test]
fn fixed_rate_spacing() {
    let (graph, _, input) = pipeline(WorkloadKind::PassThrough);
    let ledger = run(&graph, &log(50, 1), &PlaybackPolicy::fixed_rate(100.0), &[input]);
    let span = ledger.entries.last().unwrap().origin_stamp - ledger.entries[0].origin_stamp;
    // 49 intervals of 10 ms.
    assert!((480_000_000..=520_000_000).contains(&span), "span {span}");
    assert_eq!(ledger.end_ns - ledger.start_ns, 500_000_000);
    assert_eq!(ledger.rate_fidelity(0.02), Some(true));
}

#[test]
fn recorded_timing_reproduces_gaps() {
    let (graph, _, input) = pipeline(WorkloadKind::PassThrough);
    let policy = PlaybackPolicy {
        mode: graphperf::harness::PlaybackMode::RecordedTiming,
        ..Default::default()
    };
    let ledger = run(&graph, &log(5, 20_000_000), &policy, &[input]);
    let span = ledger.entries[4].origin_stamp - ledger.entries[0].origin_stamp;
    assert!((78_000_000..=100_000_000).contains(&span), "span {span}");
}

fn ledger(stamps: &[u64]) -> PlaybackLedger {
    PlaybackLedger {
        entries: stamps
            .iter()
            .enumerate()
            .map(|(id, &origin_stamp)| LedgerEntry {
                id: id as u64,
                origin_stamp,
                topic: TopicId(0),
            })
            .collect(),
        ..Default::default()
    }
}

fn rec(id: u64, recv_stamp: u64) -> MonitorRecord {
    MonitorRecord {
        id,
        recv_stamp,
        topic: TopicId(1),
    }
}

#[test]
fn blackbox_arithmetic() {
    let r = blackbox_latencies(&ledger(&[100]), &[rec(0, 250)], 0).unwrap();
    assert_eq!(r.samples[0].latency_ns, 150);
    let r = blackbox_latencies(&ledger(&[100]), &[rec(0, 100)], 0).unwrap();
    assert_eq!(r.samples[0].latency_ns, 0);
    let err = blackbox_latencies(&ledger(&[100]), &[rec(0, 50)], 0).unwrap_err();
    assert!(matches!(err, HarnessError::NegativeLatency { id: 0 }));
}

#[test]
fn phantom_ids_are_counted_not_matched() {
    let r = blackbox_latencies(&ledger(&[1, 2]), &[rec(0, 5), rec(9, 6)], 0).unwrap();
    assert_eq!((r.matched, r.lost, r.phantom_count), (1, 1, 1));
}

#[test]
fn log_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.gpl");
    write_log(&log(0, 0), &path).unwrap();
    assert_eq!(load_log(&path).unwrap(), log(0, 0));

    let big = log(1000, 7);
    write_log(&big, &path).unwrap();
    assert_eq!(load_log(&path).unwrap(), big);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_log(&path), Err(LogError::TruncatedRecord { .. })));

    std::fs::write(&path, b"NOPE0000").unwrap();
    assert!(matches!(load_log(&path), Err(LogError::BadMagic(_))));

    let mut unsorted = log(3, 1);
    for (r, s) in unsorted.records.iter_mut().zip([5, 3, 9]) {
        r.recorded_stamp = s;
    }
    std::fs::write(&path, unsorted_bytes(&unsorted)).unwrap();
    assert!(matches!(load_log(&path), Err(LogError::UnsortedTimestamps { .. })));
}

/// Encode without the writer's validation.
fn unsorted_bytes(log: &MessageLog) -> Vec<u8> {
    let mut out = b"GPL1".to_vec();
    out.extend((log.topics.len() as u32).to_le_bytes());
    for (name, id) in &log.topics {
        out.extend(id.0.to_le_bytes());
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
    }
    out.extend((log.records.len() as u64).to_le_bytes());
    for r in &log.records {
        out.extend(r.topic.0.to_le_bytes());
        out.extend(r.recorded_stamp.to_le_bytes());
        out.extend((r.payload.len() as u32).to_le_bytes());
        out.extend(&r.payload[..]);
    }
    out
}

fn arb_log() -> impl Strategy<Value = MessageLog> {
    (1usize..4, prop::collection::vec((0u32..4, 0u64..1_000, prop::collection::vec(any::<u8>(), 0..32)), 0..50))
        .prop_map(|(ntopics, raw)| {
            let topics: Vec<(String, TopicId)> = (0..ntopics).map(|i| (format!("topic_{i}"), TopicId(i as u32 * 3))).collect();
            let mut stamps: Vec<u64> = raw.iter().map(|r| r.1).collect();
            stamps.sort_unstable();
            let records = raw
                .into_iter()
                .zip(stamps)
                .map(|((t, _, p), s)| LogRecord {
                    topic: topics[t as usize % ntopics].1,
                    recorded_stamp: s,
                    payload: p.into(),
                })
                .collect();
            MessageLog { topics, records }
        })
}

proptest! {
    #[test]
    fn log_bytes_round_trip(l in arb_log()) {
        let bytes = l.to_bytes().unwrap();
        prop_assert_eq!(&bytes, &unsorted_bytes(&l));
        let back = MessageLog::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &l);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
