//! Executes one benchmark run: build the graph from a descriptor, replay the
//! log, and reduce both measurement paths to [`MetricsSummary`] values.

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::clock;
use crate::descriptor::{
    capture_environment, BenchmarkDescriptor, DescriptorError, EnvironmentRecord, MetricKind,
    TopicEntry,
};
use crate::harness::{
    blackbox_latencies, monitor_collect, playback, BlackBoxResult, HarnessError, MessageLog,
    MonitorNode, PlaybackLedger, PlaybackMode,
};
use crate::metrics::{summarize, Methodology, MetricsError, MetricsSummary, PowerProvider, PowerSampler};
use crate::par::ExecMode;
use crate::pubsub::{
    build_graph, ExecutorError, ExecutorStats, GraphConfig, PubSubError, StopCondition,
    SubscriptionSpec, TopicId,
};
use crate::tracer::{greybox_latencies, subject_hash, GreyBoxResult, TraceError, TraceFileSummary, Tracer};
use crate::workloads::{instantiate_with_mode, NodeWiring, WorkloadError};

/// Relative tolerance on the achieved playback rate.
pub const RATE_TOLERANCE: f64 = 0.02;
pub const MONITOR_NODE: &str = "__monitor";

pub mod reasons {
    pub const TRACE_OVERFLOW: &str = "trace_overflow";
    pub const NEGATIVE_LATENCY: &str = "negative_latency";
    pub const RATE_FIDELITY: &str = "rate_fidelity";
    pub const CALLBACK_FAILURE: &str = "callback_failure";
    pub const TIMEOUT: &str = "executor_timeout";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodologySelection {
    Grey,
    Black,
    Both,
}

impl MethodologySelection {
    pub fn includes(self, m: Methodology) -> bool {
        matches!(
            (self, m),
            (MethodologySelection::Both, _)
                | (MethodologySelection::Grey, Methodology::GreyBox)
                | (MethodologySelection::Black, Methodology::BlackBox)
        )
    }

    pub fn methodologies(self) -> Vec<Methodology> {
        [Methodology::GreyBox, Methodology::BlackBox]
            .into_iter()
            .filter(|&m| self.includes(m))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("grey-box measurement needs the tracer enabled")]
    TracerRequired,
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    PubSub(#[from] PubSubError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub methodology: MethodologySelection,
    pub tracer_enabled: bool,
    pub trace_capacity: usize,
    /// Overrides the descriptor's worker count.
    pub workers: Option<usize>,
    /// Mixed into every node's workload seed.
    pub seed: u64,
    pub power: PowerProvider,
    /// Where to flush the trace, if anywhere.
    pub trace_path: Option<PathBuf>,
    pub exec_mode: ExecMode,
    /// Grace period for draining after playback ends.
    pub drain_timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            methodology: MethodologySelection::Black,
            tracer_enabled: false,
            trace_capacity: crate::tracer::DEFAULT_RING_CAPACITY,
            workers: None,
            seed: 0,
            power: PowerProvider::None,
            trace_path: None,
            exec_mode: ExecMode::default(),
            drain_timeout: Duration::from_secs(30),
        }
    }
}

impl RunOptions {
    pub fn new(methodology: MethodologySelection) -> Self {
        RunOptions {
            methodology,
            tracer_enabled: methodology != MethodologySelection::Black,
            ..Default::default()
        }
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summaries: Vec<(Methodology, MetricsSummary)>,
    pub greybox: Option<GreyBoxResult>,
    pub blackbox: Option<BlackBoxResult>,
    pub ledger: PlaybackLedger,
    pub executor: ExecutorStats,
    pub failure: Option<String>,
    pub trace: Option<TraceFileSummary>,
    pub trace_overflow: u64,
    pub duplicate_count: u64,
    pub phantom_count: u64,
    pub topic_table: Vec<TopicEntry>,
    pub environment: EnvironmentRecord,
    pub timestamp: String,
}

impl RunOutcome {
    pub fn summary(&self, m: Methodology) -> Option<&MetricsSummary> {
        self.summaries.iter().find(|(k, _)| *k == m).map(|(_, s)| s)
    }

    pub fn valid(&self) -> bool {
        self.summaries.iter().all(|(_, s)| s.valid)
    }
}

/// The workload part of `descriptor` as a graph configuration, with topics
/// declared in descriptor order.
pub fn graph_config(
    descriptor: &BenchmarkDescriptor,
    workers: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<GraphConfig, RunError> {
    let mut config = GraphConfig::new(workers);
    for t in &descriptor.graph.topics {
        config.add_topic(t.clone());
    }
    let id = |config: &GraphConfig, name: &str| {
        config
            .topics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
            .ok_or_else(|| DescriptorError::UnresolvedReference(format!("topic {name:?}")))
    };
    let primary = match &descriptor.primary_input_topic {
        Some(p) => Some(id(&config, p)?),
        None => None,
    };
    for n in &descriptor.graph.nodes {
        let mut inputs = Vec::with_capacity(n.subscribe.len());
        for t in &n.subscribe {
            inputs.push(SubscriptionSpec {
                topic: id(&config, t)?,
                queue_depth: n.queue_depth,
            });
        }
        let output = match &n.publish {
            Some(t) => Some(id(&config, t)?),
            None => None,
        };
        let primary_input = primary.filter(|p| inputs.iter().any(|s| s.topic == *p));
        let mut spec = n.workload_spec();
        spec.seed = spec.seed.wrapping_add(seed);
        let wiring = NodeWiring {
            inputs,
            output,
            primary_input,
        };
        config.add_node(instantiate_with_mode(&spec, &n.name, &wiring, mode)?);
    }
    Ok(config)
}

/// Run `descriptor` once over `log`.
pub fn run_benchmark(
    descriptor: &BenchmarkDescriptor,
    log: &MessageLog,
    options: &RunOptions,
) -> Result<RunOutcome, RunError> {
    descriptor.validate()?;
    let want_grey = options.methodology.includes(Methodology::GreyBox);
    let want_black = options.methodology.includes(Methodology::BlackBox);
    if want_grey && !options.tracer_enabled {
        return Err(RunError::TracerRequired);
    }
    let workers = options.workers.unwrap_or(descriptor.graph.workers).max(1);
    let mut config = graph_config(descriptor, workers, options.seed, options.exec_mode)?;

    let sink_output = descriptor
        .sink_output()
        .ok_or_else(|| DescriptorError::InvalidGraph("sink node publishes nothing".into()))?;
    let topic = |name: &str| config.topics.iter().find(|(n, _)| n == name).map(|(_, id)| *id);
    let sink_topic = topic(sink_output).expect("validated");
    let source_topic = topic(&descriptor.source_topic).expect("validated");

    let monitor = MonitorNode::new();
    if want_black {
        config.add_node(monitor.descriptor(MONITOR_NODE, &[sink_topic]));
    }
    let tracer = options
        .tracer_enabled
        .then(|| Tracer::new(options.trace_capacity, true));
    if let Some(t) = &tracer {
        config = config.with_tracer(t.clone());
    }
    let graph = build_graph(config)?;

    // Every internal-publisher-free topic that the log feeds is replayed.
    let sources: Vec<TopicId> = graph
        .source_topics()
        .into_iter()
        .filter(|t| graph.topic_name(*t).is_some_and(|n| log.topic_id(n).is_some()))
        .collect();
    let policy = descriptor.input.playback;

    let run_start = clock::now_ns();
    let sampler = PowerSampler::start(&options.power, run_start);
    let guard = graph.register_producer();
    let (ledger, exec) = std::thread::scope(|scope| {
        let g = graph.clone();
        let timeout = options.drain_timeout;
        let executor = std::thread::Builder::new()
            .name("executor-main".into())
            .spawn_scoped(scope, move || g.run_executor(StopCondition::DrainedOrTimeout(timeout)))
            .expect("spawn executor");
        let ledger = playback(log, &policy, &graph, &sources);
        drop(guard);
        (ledger, executor.join().expect("executor thread"))
    });
    let ledger = ledger?;
    let (executor, failure) = match exec {
        Ok(stats) => (stats, None),
        Err(e @ ExecutorError::CallbackPanic { .. }) => (e.stats().clone(), Some(e.to_string())),
    };

    let environment = capture_environment(workers, options.tracer_enabled);
    let primary_ledger = ledger.restricted_to(source_topic);
    let warmup = policy.warmup_discard;
    let mut summaries = Vec::new();

    let trace_overflow = tracer.as_ref().map_or(0, Tracer::overflow_total);
    let mut greybox = None;
    let mut negative_grey = false;
    let mut last_end = ledger.end_ns;
    if let (true, Some(t)) = (want_grey, &tracer) {
        let events = t.snapshot(options.exec_mode);
        match greybox_latencies(
            &events,
            subject_hash(&descriptor.source_topic),
            subject_hash(&descriptor.sink_node),
            warmup,
        ) {
            Ok(r) => {
                last_end = last_end.max(r.last_sink_end.unwrap_or(0));
                greybox = Some(r);
            }
            Err(TraceError::NegativeLatency { .. }) => negative_grey = true,
            Err(e) => return Err(e.into()),
        }
    }
    let mut blackbox = None;
    let mut negative_black = false;
    let mut duplicate_count = 0;
    if want_black {
        let collected = monitor_collect(&monitor);
        duplicate_count = collected.duplicate_count;
        match blackbox_latencies(&primary_ledger, &collected.records, warmup) {
            Ok(r) => {
                last_end = last_end.max(r.last_recv.unwrap_or(0));
                blackbox = Some(r);
            }
            Err(HarnessError::NegativeLatency { .. }) => negative_black = true,
            Err(e) => return Err(e.into()),
        }
    }
    let phantom_count = blackbox.as_ref().map_or(0, |b| b.phantom_count);

    // The run spans playback plus the drain of its last message. Fixed-rate
    // playback ends one period after the last publish.
    let duration = last_end.saturating_sub(ledger.start_ns);
    let power = sampler.finish(run_start + duration);
    let rate_ok = match ledger.mode {
        Some(PlaybackMode::FixedRate { .. }) => ledger.rate_fidelity(RATE_TOLERANCE),
        _ => None,
    };

    let finish = |mut s: MetricsSummary, negative: bool| {
        if trace_overflow > 0 {
            s.invalidate(reasons::TRACE_OVERFLOW);
        }
        if negative {
            s.invalidate(reasons::NEGATIVE_LATENCY);
        }
        if rate_ok == Some(false) {
            s.invalidate(reasons::RATE_FIDELITY);
        }
        if failure.is_some() {
            s.invalidate(reasons::CALLBACK_FAILURE);
        }
        if executor.timed_out {
            s.invalidate(reasons::TIMEOUT);
        }
        if descriptor.requests(MetricKind::Power) || !options.power.is_none() {
            if options.power.is_none() {
                s.note("power requested but no provider selected");
            } else {
                s.apply_power(&power);
            }
        }
        s
    };
    if want_grey {
        let s = match &greybox {
            Some(r) => summarize(&r.samples, r.lost, duration, r.delivered)?,
            None => summarize(&[], 0, duration, 0)?,
        };
        summaries.push((Methodology::GreyBox, finish(s, negative_grey)));
    }
    if want_black {
        let s = match &blackbox {
            Some(r) => summarize(&r.samples, r.lost, duration, r.delivered)?,
            None => summarize(&[], 0, duration, 0)?,
        };
        summaries.push((Methodology::BlackBox, finish(s, negative_black)));
    }

    let trace = match (&tracer, &options.trace_path) {
        (Some(t), Some(path)) => Some(t.flush(path)?),
        _ => None,
    };

    Ok(RunOutcome {
        summaries,
        greybox,
        blackbox,
        ledger,
        executor,
        failure,
        trace,
        trace_overflow,
        duplicate_count,
        phantom_count,
        topic_table: graph
            .topic_table()
            .into_iter()
            .map(|(name, id)| TopicEntry { name, id: id.0 })
            .collect(),
        environment,
        timestamp: clock::wall_clock_iso8601(),
    })
}
