//! In-process publish/subscribe substrate: topics, nodes, per-subscription
//! FIFO queues and a fixed worker pool that runs subscription callbacks.
//!
//! A node is scheduled onto the ready queue at most once at a time, so its
//! callback is never re-entered concurrently, while different nodes run in
//! parallel on the worker pool.

mod executor;

pub use executor::{ExecutorError, ExecutorStats, StopCondition};

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::MessageEnvelope;
use crate::tracer::{subject_hash, EventType, Tracer};

/// Topic identifier, assigned sequentially in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub u32);

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "topic#{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PubSubError {
    #[error("duplicate node name {0:?}")]
    DuplicateNodeName(String),
    #[error("duplicate topic name {0:?}")]
    DuplicateTopicName(String),
    #[error("duplicate topic id {0}")]
    DuplicateTopicId(TopicId),
    #[error("node {node:?} references undeclared {topic}")]
    UnknownTopicReference { node: String, topic: TopicId },
    #[error("unknown {0}")]
    UnknownTopic(TopicId),
    #[error("node {node:?} publishes on undeclared publication {topic}")]
    UndeclaredPublication { node: String, topic: TopicId },
    #[error("queue depth must be at least 1 (node {0:?})")]
    ZeroQueueDepth(String),
    #[error("executor needs at least one worker")]
    NoWorkers,
}

/// Error type returned by node callbacks.
pub type CallbackError = Box<dyn std::error::Error + Send + Sync>;

/// A subscription callback. Invoked serially per node.
pub trait Callback: Send {
    fn on_message(
        &mut self,
        ctx: &mut CallbackContext<'_>,
        topic: TopicId,
        envelope: &MessageEnvelope,
    ) -> Result<(), CallbackError>;
}

impl<F> Callback for F
where
    F: FnMut(&mut CallbackContext<'_>, TopicId, &MessageEnvelope) -> Result<(), CallbackError>
        + Send,
{
    fn on_message(
        &mut self,
        ctx: &mut CallbackContext<'_>,
        topic: TopicId,
        envelope: &MessageEnvelope,
    ) -> Result<(), CallbackError> {
        self(ctx, topic, envelope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubscriptionSpec {
    pub topic: TopicId,
    /// `None` is unbounded.
    pub queue_depth: Option<usize>,
}

impl From<TopicId> for SubscriptionSpec {
    fn from(topic: TopicId) -> Self {
        SubscriptionSpec {
            topic,
            queue_depth: None,
        }
    }
}

pub struct NodeDescriptor {
    pub name: String,
    pub subscriptions: Vec<SubscriptionSpec>,
    pub publications: Vec<TopicId>,
    pub callback: Box<dyn Callback>,
}

impl fmt::Debug for NodeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeDescriptor")
            .field("name", &self.name)
            .field("subscriptions", &self.subscriptions)
            .field("publications", &self.publications)
            .finish_non_exhaustive()
    }
}

impl NodeDescriptor {
    pub fn new(name: impl Into<String>, callback: impl Callback + 'static) -> Self {
        NodeDescriptor {
            name: name.into(),
            subscriptions: Vec::new(),
            publications: Vec::new(),
            callback: Box::new(callback),
        }
    }

    pub fn subscribe(mut self, topic: TopicId) -> Self {
        self.subscriptions.push(topic.into());
        self
    }

    pub fn subscribe_bounded(mut self, topic: TopicId, depth: usize) -> Self {
        self.subscriptions.push(SubscriptionSpec {
            topic,
            queue_depth: Some(depth),
        });
        self
    }

    pub fn publishes(mut self, topic: TopicId) -> Self {
        self.publications.push(topic);
        self
    }
}

#[derive(Debug)]
pub struct GraphConfig {
    pub topics: Vec<(String, TopicId)>,
    pub nodes: Vec<NodeDescriptor>,
    pub executor_workers: usize,
    pub tracer: Option<Tracer>,
}

impl GraphConfig {
    pub fn new(executor_workers: usize) -> Self {
        GraphConfig {
            topics: Vec::new(),
            nodes: Vec::new(),
            executor_workers,
            tracer: None,
        }
    }

    /// Declare a topic; ids are handed out in declaration order.
    pub fn add_topic(&mut self, name: impl Into<String>) -> TopicId {
        let id = TopicId(self.topics.len() as u32);
        self.topics.push((name.into(), id));
        id
    }

    pub fn add_node(&mut self, node: NodeDescriptor) -> &mut Self {
        self.nodes.push(node);
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = Some(tracer);
        self
    }
}

struct TopicState {
    name: String,
    id: TopicId,
    hash: u64,
    subscribers: Vec<usize>,
    has_internal_publisher: bool,
}

struct SubState {
    node: usize,
    local: usize,
    topic: TopicId,
    depth: Option<usize>,
    enqueued: AtomicU64,
    delivered: AtomicU64,
    dropped: AtomicU64,
}

struct Inbox {
    queue: VecDeque<(usize, MessageEnvelope)>,
    queued_per_sub: Vec<usize>,
    scheduled: bool,
}

struct NodeState {
    name: String,
    hash: u64,
    publications: Vec<TopicId>,
    callback: Mutex<Box<dyn Callback>>,
    inbox: Mutex<Inbox>,
}

pub(crate) struct GraphShared {
    topics: Vec<TopicState>,
    topic_index: HashMap<TopicId, usize>,
    subs: Vec<SubState>,
    nodes: Vec<NodeState>,
    workers: usize,
    ready_tx: Sender<usize>,
    ready_rx: Receiver<usize>,
    outstanding: AtomicUsize,
    producers: AtomicUsize,
    callbacks: AtomicU64,
    dropped: AtomicU64,
    tracer: Option<Tracer>,
    run_lock: Mutex<()>,
}

/// An executable computational graph. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct Graph {
    shared: Arc<GraphShared>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("topics", &self.shared.topics.len())
            .field("nodes", &self.shared.nodes.len())
            .field("workers", &self.shared.workers)
            .finish()
    }
}

/// Per-subscription delivery counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionStats {
    pub node: String,
    pub topic: TopicId,
    /// Messages published on the topic while this subscription existed.
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
}

/// Validate a configuration and allocate its runtime state.
pub fn build_graph(config: GraphConfig) -> Result<Graph, PubSubError> {
    Graph::build(config)
}

impl Graph {
    pub fn build(config: GraphConfig) -> Result<Graph, PubSubError> {
        if config.executor_workers == 0 {
            return Err(PubSubError::NoWorkers);
        }
        let mut topics = Vec::with_capacity(config.topics.len());
        let mut topic_index = HashMap::new();
        let mut names = HashSet::new();
        for (name, id) in config.topics {
            if !names.insert(name.clone()) {
                return Err(PubSubError::DuplicateTopicName(name));
            }
            if topic_index.insert(id, topics.len()).is_some() {
                return Err(PubSubError::DuplicateTopicId(id));
            }
            let hash = match &config.tracer {
                Some(t) => t.register_name(&name),
                None => subject_hash(&name),
            };
            topics.push(TopicState {
                name,
                id,
                hash,
                subscribers: Vec::new(),
                has_internal_publisher: false,
            });
        }

        let mut node_names = HashSet::new();
        let mut nodes = Vec::with_capacity(config.nodes.len());
        let mut subs = Vec::new();
        for (node_idx, desc) in config.nodes.into_iter().enumerate() {
            if !node_names.insert(desc.name.clone()) {
                return Err(PubSubError::DuplicateNodeName(desc.name));
            }
            let lookup = |topic: TopicId| {
                topic_index
                    .get(&topic)
                    .copied()
                    .ok_or_else(|| PubSubError::UnknownTopicReference {
                        node: desc.name.clone(),
                        topic,
                    })
            };
            for (local, sub) in desc.subscriptions.iter().enumerate() {
                let t = lookup(sub.topic)?;
                if sub.queue_depth == Some(0) {
                    return Err(PubSubError::ZeroQueueDepth(desc.name.clone()));
                }
                topics[t].subscribers.push(subs.len());
                subs.push(SubState {
                    node: node_idx,
                    local,
                    topic: sub.topic,
                    depth: sub.queue_depth,
                    enqueued: AtomicU64::new(0),
                    delivered: AtomicU64::new(0),
                    dropped: AtomicU64::new(0),
                });
            }
            for &p in &desc.publications {
                let t = lookup(p)?;
                topics[t].has_internal_publisher = true;
            }
            let hash = match &config.tracer {
                Some(t) => t.register_name(&desc.name),
                None => subject_hash(&desc.name),
            };
            nodes.push(NodeState {
                hash,
                publications: desc.publications,
                callback: Mutex::new(desc.callback),
                inbox: Mutex::new(Inbox {
                    queue: VecDeque::new(),
                    queued_per_sub: vec![0; desc.subscriptions.len()],
                    scheduled: false,
                }),
                name: desc.name,
            });
        }

        let (ready_tx, ready_rx) = crossbeam_channel::unbounded();
        Ok(Graph {
            shared: Arc::new(GraphShared {
                topics,
                topic_index,
                subs,
                nodes,
                workers: config.executor_workers,
                ready_tx,
                ready_rx,
                outstanding: AtomicUsize::new(0),
                producers: AtomicUsize::new(0),
                callbacks: AtomicU64::new(0),
                dropped: AtomicU64::new(0),
                tracer: config.tracer,
                run_lock: Mutex::new(()),
            }),
        })
    }

    pub fn workers(&self) -> usize {
        self.shared.workers
    }

    pub fn tracer(&self) -> Option<&Tracer> {
        self.shared.tracer.as_ref()
    }

    pub fn topic_id(&self, name: &str) -> Option<TopicId> {
        self.shared
            .topics
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.id)
    }

    pub fn topic_name(&self, topic: TopicId) -> Option<&str> {
        self.shared
            .topic_index
            .get(&topic)
            .map(|&i| self.shared.topics[i].name.as_str())
    }

    pub fn has_topic(&self, topic: TopicId) -> bool {
        self.shared.topic_index.contains_key(&topic)
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.shared.nodes.iter().any(|n| n.name == name)
    }

    /// Declared (name, id) pairs in declaration order.
    pub fn topic_table(&self) -> Vec<(String, TopicId)> {
        self.shared
            .topics
            .iter()
            .map(|t| (t.name.clone(), t.id))
            .collect()
    }

    /// Topics that no node in the graph publishes to.
    pub fn source_topics(&self) -> Vec<TopicId> {
        self.shared
            .topics
            .iter()
            .filter(|t| !t.has_internal_publisher)
            .map(|t| t.id)
            .collect()
    }

    /// Names of nodes reachable downstream of `topic`.
    pub fn reachable_nodes(&self, topic: TopicId) -> Result<BTreeSet<String>, PubSubError> {
        let start = *self
            .shared
            .topic_index
            .get(&topic)
            .ok_or(PubSubError::UnknownTopic(topic))?;
        let mut seen_topics = HashSet::from([start]);
        let mut frontier = vec![start];
        let mut reached = BTreeSet::new();
        while let Some(t) = frontier.pop() {
            for &s in &self.shared.topics[t].subscribers {
                let node = &self.shared.nodes[self.shared.subs[s].node];
                if reached.insert(node.name.clone()) {
                    for p in &node.publications {
                        let pi = self.shared.topic_index[p];
                        if seen_topics.insert(pi) {
                            frontier.push(pi);
                        }
                    }
                }
            }
        }
        Ok(reached)
    }

    /// Enqueue `envelope` on every subscription of `topic`.
    ///
    /// Returns `false` if any bounded subscription queue was full and dropped
    /// the message.
    pub fn publish(&self, topic: TopicId, envelope: MessageEnvelope) -> Result<bool, PubSubError> {
        let shared = &*self.shared;
        let t = &shared.topics[*shared
            .topic_index
            .get(&topic)
            .ok_or(PubSubError::UnknownTopic(topic))?];
        if let Some(tracer) = &shared.tracer {
            tracer.emit(EventType::Publish, envelope.id, t.hash);
        }
        let mut accepted = true;
        for &s in &t.subscribers {
            let sub = &shared.subs[s];
            let node = &shared.nodes[sub.node];
            let mut inbox = node.inbox.lock().unwrap();
            if sub
                .depth
                .is_some_and(|d| inbox.queued_per_sub[sub.local] >= d)
            {
                sub.dropped.fetch_add(1, Ordering::Relaxed);
                shared.dropped.fetch_add(1, Ordering::Relaxed);
                accepted = false;
                continue;
            }
            inbox.queue.push_back((s, envelope.clone()));
            inbox.queued_per_sub[sub.local] += 1;
            sub.enqueued.fetch_add(1, Ordering::Relaxed);
            shared.outstanding.fetch_add(1, Ordering::AcqRel);
            if !inbox.scheduled {
                inbox.scheduled = true;
                let _ = shared.ready_tx.send(sub.node);
            }
        }
        Ok(accepted)
    }

    /// Keeps drain-based executor runs alive until dropped.
    pub fn register_producer(&self) -> ProducerGuard {
        self.shared.producers.fetch_add(1, Ordering::AcqRel);
        ProducerGuard {
            graph: self.clone(),
        }
    }

    pub fn subscription_stats(&self) -> Vec<SubscriptionStats> {
        self.shared
            .subs
            .iter()
            .map(|s| {
                let node = &self.shared.nodes[s.node];
                let queued = node.inbox.lock().unwrap().queued_per_sub[s.local] as u64;
                let enqueued = s.enqueued.load(Ordering::Relaxed);
                let dropped = s.dropped.load(Ordering::Relaxed);
                SubscriptionStats {
                    node: node.name.clone(),
                    topic: s.topic,
                    published: enqueued + dropped,
                    delivered: s.delivered.load(Ordering::Relaxed),
                    dropped,
                    queued,
                }
            })
            .collect()
    }

    /// Messages queued or in flight.
    pub fn outstanding(&self) -> usize {
        self.shared.outstanding.load(Ordering::Acquire)
    }

    pub fn run_executor(&self, until: StopCondition) -> Result<ExecutorStats, ExecutorError> {
        executor::run(self, until)
    }
}

/// See [`Graph::register_producer`].
pub struct ProducerGuard {
    graph: Graph,
}

impl Drop for ProducerGuard {
    fn drop(&mut self) {
        self.graph.shared.producers.fetch_sub(1, Ordering::AcqRel);
    }
}

/// Handed to callbacks; lets a node publish on its declared topics.
pub struct CallbackContext<'a> {
    graph: &'a Graph,
    node: usize,
}

impl CallbackContext<'_> {
    pub fn node_name(&self) -> &str {
        &self.graph.shared.nodes[self.node].name
    }

    pub fn publications(&self) -> &[TopicId] {
        &self.graph.shared.nodes[self.node].publications
    }

    pub fn publish(&mut self, topic: TopicId, envelope: MessageEnvelope) -> Result<bool, PubSubError> {
        let node = &self.graph.shared.nodes[self.node];
        if !node.publications.contains(&topic) {
            return Err(PubSubError::UndeclaredPublication {
                node: node.name.clone(),
                topic,
            });
        }
        self.graph.publish(topic, envelope)
    }
}
