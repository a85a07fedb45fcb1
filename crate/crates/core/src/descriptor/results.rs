use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchmarkDescriptor, Category, DescriptorError, EnvironmentRecord, SCHEMA_VERSION};
use crate::metrics::{Methodology, MetricsSummary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicEntry {
    pub name: String,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutorRecord {
    pub workers: usize,
    pub callbacks_invoked: u64,
    pub messages_dropped: u64,
    pub wall_time_s: f64,
}

/// One run under one methodology. Field order is the emitted key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsDocument {
    pub schema: u64,
    pub benchmark_id: String,
    pub category: Category,
    /// Variant label used by comparisons and radar plots.
    pub label: String,
    pub run: u32,
    pub methodology: Methodology,
    pub seed: u64,
    pub timestamp: String,
    pub summary: MetricsSummary,
    pub environment: EnvironmentRecord,
    pub topic_table: Vec<TopicEntry>,
    pub executor: ExecutorRecord,
    pub duplicate_count: u64,
    pub phantom_count: u64,
    pub trace_overflow: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
}

impl ResultsDocument {
    /// A document skeleton for `descriptor` with empty run details.
    pub fn new(
        descriptor: &BenchmarkDescriptor,
        methodology: Methodology,
        summary: MetricsSummary,
        environment: EnvironmentRecord,
    ) -> Self {
        ResultsDocument {
            schema: SCHEMA_VERSION,
            benchmark_id: descriptor.id.clone(),
            category: descriptor.category,
            label: "default".into(),
            run: 0,
            methodology,
            seed: 0,
            timestamp: crate::clock::wall_clock_iso8601(),
            summary,
            executor: ExecutorRecord {
                workers: environment.executor_workers,
                callbacks_invoked: 0,
                messages_dropped: 0,
                wall_time_s: 0.0,
            },
            environment,
            topic_table: Vec::new(),
            duplicate_count: 0,
            phantom_count: 0,
            trace_overflow: 0,
            trace_file: None,
        }
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.schema != SCHEMA_VERSION {
            return Err(DescriptorError::SchemaVersionUnsupported(self.schema));
        }
        let letter = super::check_id(&self.benchmark_id)?;
        if letter != self.category.letter() {
            return Err(DescriptorError::CategoryIdMismatch {
                id: self.benchmark_id.clone(),
                category: self.category,
                expected: self.category.letter(),
            });
        }
        if self.environment.core_count == 0 {
            return Err(DescriptorError::Malformed {
                message: "environment.core_count must be at least 1".into(),
                line: None,
            });
        }
        Ok(())
    }
}

pub fn results_to_string(doc: &ResultsDocument) -> String {
    serde_yaml::to_string(doc).expect("results serialize")
}

/// Write a results document to `path`.
pub fn emit_results(doc: &ResultsDocument, path: &Path) -> Result<(), DescriptorError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| DescriptorError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, results_to_string(doc)).map_err(|source| DescriptorError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a results document under the same strict rules as descriptors.
pub fn parse_results(text: &str) -> Result<ResultsDocument, DescriptorError> {
    let doc: ResultsDocument = serde_yaml::from_str(text).map_err(DescriptorError::from_yaml)?;
    doc.validate()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::super::{capture_environment, parse_descriptor, tests::MINIMAL};
    use super::*;
    use crate::metrics::{summarize, LatencySample};

    fn doc(valid: bool) -> ResultsDocument {
        let d = parse_descriptor(MINIMAL).unwrap();
        let samples: Vec<_> = (0..5)
            .map(|i| LatencySample {
                message_id: i,
                latency_ns: 1_000_000 + i * 10,
                methodology: Methodology::BlackBox,
            })
            .collect();
        let mut s = summarize(&samples, 0, 1_000_000_000, 5).unwrap();
        if !valid {
            s.invalidate("trace_overflow");
        }
        ResultsDocument::new(&d, Methodology::BlackBox, s, capture_environment(2, true))
    }

    #[test]
    fn invalid_run_lists_reason() {
        let text = results_to_string(&doc(false));
        assert!(text.contains("valid: false"));
        assert!(text.contains("- trace_overflow"));
        let back = parse_results(&text).unwrap();
        assert_eq!(back.summary.invalid_reasons, ["trace_overflow"]);
    }

    #[test]
    fn absent_power_keys_are_omitted() {
        let text = results_to_string(&doc(true));
        for key in ["mean_power_w", "energy_j", "msgs_per_joule", "null", "~"] {
            assert!(!text.contains(key), "{key} in\n{text}");
        }
    }

    #[test]
    fn round_trip_and_strictness() {
        let d = doc(true);
        let text = results_to_string(&d);
        assert_eq!(parse_results(&text).unwrap(), d);
        let extra = format!("{text}surprise: 1\n");
        assert!(matches!(parse_results(&extra), Err(DescriptorError::UnknownKey(_))));
    }

    #[test]
    fn key_order_is_fixed() {
        let text = results_to_string(&doc(true));
        let keys: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with(' ') && !l.starts_with('-'))
            .filter_map(|l| l.split(':').next())
            .collect();
        assert_eq!(&keys[..4], ["schema", "benchmark_id", "category", "label"]);
    }
}
