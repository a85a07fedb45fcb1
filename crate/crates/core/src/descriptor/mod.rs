//! `benchmark.yaml` descriptors, results documents and run-rule environment
//! capture.
//!
//! Both documents use a strict, versioned schema: unknown keys are errors and
//! absent optional values are omitted rather than written as nulls.

mod env;
mod results;

pub use env::{capture_environment, EnvironmentRecord, HARNESS_VERSION, UNKNOWN};
pub use results::{
    emit_results, parse_results, results_to_string, ExecutorRecord, ResultsDocument, TopicEntry,
};

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::PlaybackPolicy;
use crate::metrics::{Methodology, Metric};
use crate::workloads::{WorkloadKind, WorkloadSpec};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersionUnsupported(u64),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("id {id:?} does not match category {category} (expected prefix '{expected}')")]
    CategoryIdMismatch {
        id: String,
        category: Category,
        expected: char,
    },
    #[error("malformed benchmark id {0:?}: expected <letter a-d><digits>_<name>")]
    BadId(String),
    #[error("unit {unit:?} does not fit metric {metric} (expected {expected:?})")]
    BadUnit {
        metric: String,
        unit: String,
        expected: &'static str,
    },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("{message}{}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Malformed { message: String, line: Option<usize> },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DescriptorError {
    fn from_yaml(e: serde_yaml::Error) -> Self {
        let message = e.to_string();
        if let Some(field) = backticked(&message, "missing field `") {
            return DescriptorError::MissingField(field);
        }
        if let Some(field) = backticked(&message, "unknown field `") {
            return DescriptorError::UnknownKey(field);
        }
        DescriptorError::Malformed {
            line: e.location().map(|l| l.line()),
            message,
        }
    }
}

fn backticked(message: &str, prefix: &str) -> Option<String> {
    let rest = &message[message.find(prefix)? + prefix.len()..];
    Some(rest[..rest.find('`')?].to_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Perception,
    Localization,
    Control,
    Manipulation,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Perception,
        Category::Localization,
        Category::Control,
        Category::Manipulation,
    ];

    pub fn letter(self) -> char {
        match self {
            Category::Perception => 'a',
            Category::Localization => 'b',
            Category::Control => 'c',
            Category::Manipulation => 'd',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Category::ALL.into_iter().find(|k| k.letter() == c)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Perception => "perception",
            Category::Localization => "localization",
            Category::Control => "control",
            Category::Manipulation => "manipulation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s || s.len() == 1 && s.starts_with(c.letter()))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Latency,
    Throughput,
    Power,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Latency => "latency",
            MetricKind::Throughput => "throughput",
            MetricKind::Power => "power",
        })
    }
}

fn default_workers() -> usize {
    2
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub workload: WorkloadKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub seed: u64,
    pub subscribe: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish: Option<String>,
    /// Bounded depth for every subscription of this node; unbounded if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_depth: Option<usize>,
}

impl NodeSpec {
    pub fn workload_spec(&self) -> WorkloadSpec {
        WorkloadSpec::new(self.workload.clone(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub topics: Vec<String>,
    pub nodes: Vec<NodeSpec>,
}

impl GraphSpec {
    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Topics that no node of the graph publishes.
    pub fn source_topics(&self) -> Vec<&str> {
        self.topics
            .iter()
            .filter(|t| !self.nodes.iter().any(|n| n.publish.as_deref() == Some(t.as_str())))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Message log path, relative to the descriptor's directory.
    pub log: String,
    pub playback: PlaybackPolicy,
}

/// An accepted, hand-curated result stored in `benchmark.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub metric: String,
    pub value: f64,
    pub unit: String,
    pub methodology: Methodology,
    pub environment: EnvironmentRecord,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResultRecord {
    pub fn validate(&self) -> Result<Metric, DescriptorError> {
        let metric: Metric = self
            .metric
            .parse()
            .map_err(|_| DescriptorError::UnknownMetric(self.metric.clone()))?;
        if metric.unit() != self.unit {
            return Err(DescriptorError::BadUnit {
                metric: self.metric.clone(),
                unit: self.unit.clone(),
                expected: metric.unit(),
            });
        }
        Ok(metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkDescriptor {
    pub schema: u64,
    pub id: String,
    pub name: String,
    pub description: String,
    pub category: Category,
    pub graph: GraphSpec,
    pub input: InputSpec,
    pub source_topic: String,
    pub sink_node: String,
    /// Input whose id fan-in nodes propagate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_input_topic: Option<String>,
    pub metrics_requested: Vec<MetricKind>,
    #[serde(default)]
    pub accepted_results: Vec<ResultRecord>,
}

const TOP_LEVEL_KEYS: &[(&str, bool)] = &[
    ("schema", true),
    ("id", true),
    ("name", true),
    ("description", true),
    ("category", true),
    ("graph", true),
    ("input", true),
    ("source_topic", true),
    ("sink_node", true),
    ("primary_input_topic", false),
    ("metrics_requested", true),
    ("accepted_results", false),
];

impl BenchmarkDescriptor {
    pub fn requests(&self, kind: MetricKind) -> bool {
        self.metrics_requested.contains(&kind)
    }

    pub fn sink(&self) -> Option<&NodeSpec> {
        self.graph.node(&self.sink_node)
    }

    /// Topic the monitor subscribes to: the sink node's output.
    pub fn sink_output(&self) -> Option<&str> {
        self.sink()?.publish.as_deref()
    }

    /// Check every invariant beyond the document's shape.
    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.schema != SCHEMA_VERSION {
            return Err(DescriptorError::SchemaVersionUnsupported(self.schema));
        }
        let letter = check_id(&self.id)?;
        if letter != self.category.letter() {
            return Err(DescriptorError::CategoryIdMismatch {
                id: self.id.clone(),
                category: self.category,
                expected: self.category.letter(),
            });
        }
        self.validate_graph()?;
        self.input
            .playback
            .validate()
            .map_err(|e| DescriptorError::Malformed {
                message: e.to_string(),
                line: None,
            })?;
        for r in &self.accepted_results {
            r.validate()?;
        }
        Ok(())
    }

    fn validate_graph(&self) -> Result<(), DescriptorError> {
        let g = &self.graph;
        let invalid = |m: String| Err(DescriptorError::InvalidGraph(m));
        if g.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        let mut topics = BTreeSet::new();
        for t in &g.topics {
            if !topics.insert(t.as_str()) {
                return invalid(format!("duplicate topic {t:?}"));
            }
        }
        let resolve = |what: &str, topic: &str| {
            if topics.contains(topic) {
                Ok(())
            } else {
                Err(DescriptorError::UnresolvedReference(format!("{what} names unknown topic {topic:?}")))
            }
        };
        let mut names = BTreeSet::new();
        for n in &g.nodes {
            if !names.insert(n.name.as_str()) {
                return invalid(format!("duplicate node {:?}", n.name));
            }
            if n.subscribe.is_empty() {
                return invalid(format!("node {:?} subscribes to nothing", n.name));
            }
            for t in &n.subscribe {
                resolve(&format!("node {:?}", n.name), t)?;
            }
            if let Some(t) = &n.publish {
                resolve(&format!("node {:?}", n.name), t)?;
            }
            if n.queue_depth == Some(0) {
                return invalid(format!("node {:?} has queue_depth 0", n.name));
            }
            let spec = n.workload_spec();
            spec.validate()
                .map_err(|e| DescriptorError::InvalidGraph(format!("node {:?}: {e}", n.name)))?;
            if spec.is_fan_in() {
                if n.subscribe.len() < 2 {
                    return invalid(format!("fan-in node {:?} needs two inputs", n.name));
                }
                match &self.primary_input_topic {
                    Some(p) if n.subscribe.contains(p) => {}
                    Some(p) => {
                        return invalid(format!("primary input {p:?} is not an input of {:?}", n.name))
                    }
                    None => return Err(DescriptorError::MissingField("primary_input_topic".into())),
                }
            }
        }
        resolve("source_topic", &self.source_topic)?;
        if !g.source_topics().contains(&self.source_topic.as_str()) {
            return invalid(format!("source topic {:?} has an internal publisher", self.source_topic));
        }
        if let Some(p) = &self.primary_input_topic {
            resolve("primary_input_topic", p)?;
        }
        let sink = self.sink().ok_or_else(|| {
            DescriptorError::UnresolvedReference(format!("sink_node {:?} is not a node", self.sink_node))
        })?;
        if sink.publish.is_none() {
            return invalid(format!("sink node {:?} publishes nothing to monitor", sink.name));
        }
        Ok(())
    }
}

/// Validate the `[a-d][0-9]+_[a-z0-9_]+` id shape; returns the category letter.
pub fn check_id(id: &str) -> Result<char, DescriptorError> {
    let bad = || DescriptorError::BadId(id.to_owned());
    let mut chars = id.chars();
    let letter = chars.next().filter(|c| ('a'..='d').contains(c)).ok_or_else(bad)?;
    let rest = chars.as_str();
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    let tail = rest[digits..].strip_prefix('_').ok_or_else(bad)?;
    let tail_ok = !tail.is_empty()
        && tail
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if digits == 0 || !tail_ok {
        return Err(bad());
    }
    Ok(letter)
}

/// Parse and validate a `benchmark.yaml` document.
pub fn parse_descriptor(text: &str) -> Result<BenchmarkDescriptor, DescriptorError> {
    let value: serde_yaml::Value = serde_yaml::from_str(text).map_err(DescriptorError::from_yaml)?;
    let map = value.as_mapping().ok_or_else(|| DescriptorError::Malformed {
        message: "descriptor must be a mapping".into(),
        line: None,
    })?;
    match map.get("schema") {
        None => return Err(DescriptorError::MissingField("schema".into())),
        Some(v) => match v.as_u64() {
            Some(SCHEMA_VERSION) => {}
            Some(other) => return Err(DescriptorError::SchemaVersionUnsupported(other)),
            None => {
                return Err(DescriptorError::Malformed {
                    message: "schema must be an integer".into(),
                    line: None,
                })
            }
        },
    }
    for key in map.keys() {
        let key = key.as_str().unwrap_or("<non-string>");
        if !TOP_LEVEL_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(DescriptorError::UnknownKey(key.to_owned()));
        }
    }
    for (key, required) in TOP_LEVEL_KEYS {
        if *required && !map.contains_key(*key) {
            return Err(DescriptorError::MissingField((*key).to_owned()));
        }
    }
    let desc: BenchmarkDescriptor = serde_yaml::from_str(text).map_err(DescriptorError::from_yaml)?;
    desc.validate()?;
    Ok(desc)
}

pub fn serialize_descriptor(desc: &BenchmarkDescriptor) -> String {
    serde_yaml::to_string(desc).expect("descriptor serializes")
}

pub fn load_descriptor(path: &Path) -> Result<BenchmarkDescriptor, DescriptorError> {
    let text = std::fs::read_to_string(path).map_err(|source| DescriptorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_descriptor(&text)
}
