//! Loading results documents and aggregating them across runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graphperf::descriptor::{parse_results, Category, ResultsDocument};
use graphperf::metrics::{Methodology, Metric};
use walkdir::WalkDir;

use crate::error::{CliResult, IoContext};

/// Results files under `paths`. Directories are searched recursively for
/// `*.yaml` files, skipping descriptors and trace name sidecars.
pub fn collect_result_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                let entry = entry.io_context(|| format!("walking {}", p.display()))?;
                let name = entry.file_name().to_string_lossy();
                if entry.file_type().is_file()
                    && name.ends_with(".yaml")
                    && name != "benchmark.yaml"
                    && !name.ends_with(".names.yaml")
                {
                    files.push(entry.into_path());
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

pub fn load_results(paths: &[PathBuf]) -> CliResult<Vec<ResultsDocument>> {
    collect_result_files(paths)?
        .into_iter()
        .map(|f| load_one(&f))
        .collect()
}

fn load_one(path: &Path) -> CliResult<ResultsDocument> {
    let text = std::fs::read_to_string(path).io_context(|| format!("reading {}", path.display()))?;
    parse_results(&text).io_context(|| format!("parsing {}", path.display()))
}

/// The conservative cross-run value: worst over valid runs. Latency, power
/// and energy take the maximum; throughput and efficiency the minimum.
pub fn headline(metric: Metric, values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let fold = if metric.higher_is_better() { f64::min } else { f64::max };
    values.into_iter().reduce(fold)
}

/// One (benchmark, label, methodology) series across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub benchmark_id: String,
    pub category: Category,
    pub label: String,
    pub methodology: Methodology,
    pub runs: Vec<ResultsDocument>,
}

impl RunSeries {
    pub fn valid_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.summary.valid).count()
    }

    /// Per-run values in run order, `None` where the metric is absent.
    pub fn per_run(&self, metric: Metric) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| metric.value(&r.summary)).collect()
    }

    pub fn headline(&self, metric: Metric) -> Option<f64> {
        headline(
            metric,
            self.runs
                .iter()
                .filter(|r| r.summary.valid)
                .filter_map(|r| metric.value(&r.summary)),
        )
    }
}

pub type SeriesKey = (String, String, Methodology);

/// Group documents by (benchmark id, label, methodology), runs in run order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossRunReport {
    pub series: BTreeMap<SeriesKey, RunSeries>,
}

impl CrossRunReport {
    pub fn new(docs: Vec<ResultsDocument>) -> Self {
        let mut series: BTreeMap<SeriesKey, RunSeries> = BTreeMap::new();
        for d in docs {
            let key = (d.benchmark_id.clone(), d.label.clone(), d.methodology);
            series
                .entry(key)
                .or_insert_with(|| RunSeries {
                    benchmark_id: d.benchmark_id.clone(),
                    category: d.category,
                    label: d.label.clone(),
                    methodology: d.methodology,
                    runs: Vec::new(),
                })
                .runs
                .push(d);
        }
        for s in series.values_mut() {
            s.runs.sort_by_key(|r| r.run);
        }
        CrossRunReport { series }
    }

    pub fn benchmark_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.series.keys().map(|(id, _, _)| id.as_str()).collect();
        ids.dedup();
        ids
    }
}

pub const TABLE_METRICS: [Metric; 6] = [
    Metric::MeanLatency,
    Metric::P99Latency,
    Metric::MaxLatency,
    Metric::Throughput,
    Metric::MeanPower,
    Metric::Efficiency,
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

/// Plain-text headline table.
pub fn render_table(report: &CrossRunReport) -> String {
    let mut header = vec!["benchmark".to_owned(), "label".into(), "methodology".into(), "runs".into(), "valid".into()];
    header.extend(TABLE_METRICS.iter().map(|m| format!("{} ({})", m.name(), m.unit())));
    let mut rows = vec![header];
    for s in report.series.values() {
        let mut row = vec![
            s.benchmark_id.clone(),
            s.label.clone(),
            s.methodology.to_string(),
            s.runs.len().to_string(),
            s.valid_runs().to_string(),
        ];
        row.extend(TABLE_METRICS.iter().map(|&m| cell(s.headline(m))));
        rows.push(row);
    }
    align(&rows)
}

pub fn render_table_csv(report: &CrossRunReport) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["benchmark_id", "label", "methodology", "runs", "valid_runs"];
    header.extend(TABLE_METRICS.iter().map(|m| m.name()));
    w.write_record(&header).io_context(|| "writing csv".into())?;
    for s in report.series.values() {
        let mut row = vec![
            s.benchmark_id.clone(),
            s.label.clone(),
            s.methodology.to_string(),
            s.runs.len().to_string(),
            s.valid_runs().to_string(),
        ];
        row.extend(TABLE_METRICS.iter().map(|&m| s.headline(m).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).io_context(|| "writing csv".into())?;
    }
    let bytes = w.into_inner().io_context(|| "writing csv".into())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Left-aligned columns separated by two spaces.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(i, s)| format!("{s:<w$}", w = widths[i])).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use graphperf::descriptor::{capture_environment, ExecutorRecord, SCHEMA_VERSION};
    use graphperf::metrics::{summarize, MetricsSummary};

    pub fn doc(id: &str, label: &str, run: u32, mean_ms: f64, throughput: f64) -> ResultsDocument {
        let mut summary: MetricsSummary = summarize(&[], 0, 1, 0).unwrap();
        summary.mean_latency_ms = Some(mean_ms);
        summary.max_latency_ms = Some(mean_ms);
        summary.throughput_msgs_per_s = throughput;
        let category = Category::from_letter(id.chars().next().unwrap()).unwrap();
        ResultsDocument {
            schema: SCHEMA_VERSION,
            benchmark_id: id.into(),
            category,
            label: label.into(),
            run,
            methodology: Methodology::BlackBox,
            seed: 0,
            timestamp: "2024-01-01T00:00:00.000Z".into(),
            summary,
            environment: capture_environment(2, false),
            topic_table: vec![],
            executor: ExecutorRecord {
                workers: 2,
                callbacks_invoked: 0,
                messages_dropped: 0,
                wall_time_s: 0.0,
            },
            duplicate_count: 0,
            phantom_count: 0,
            trace_overflow: 0,
            trace_file: None,
        }
    }

    #[test]
    fn headline_is_conservative() {
        let report = CrossRunReport::new(vec![
            doc("c1_x", "v", 0, 5.0, 100.0),
            doc("c1_x", "v", 1, 9.0, 90.0),
            doc("c1_x", "v", 2, 3.0, 120.0),
        ]);
        let s = report.series.values().next().unwrap();
        assert_eq!(s.headline(Metric::MeanLatency), Some(9.0));
        assert_eq!(s.headline(Metric::Throughput), Some(90.0));
        assert_eq!(s.per_run(Metric::MeanLatency), [Some(5.0), Some(9.0), Some(3.0)]);
    }

    #[test]
    fn invalid_runs_do_not_count() {
        let mut bad = doc("c1_x", "v", 1, 50.0, 1.0);
        bad.summary.invalidate("trace_overflow");
        let report = CrossRunReport::new(vec![doc("c1_x", "v", 0, 5.0, 100.0), bad]);
        let s = report.series.values().next().unwrap();
        assert_eq!(s.headline(Metric::MeanLatency), Some(5.0));
        assert_eq!(s.valid_runs(), 1);
    }

    #[test]
    fn table_lists_each_series() {
        let report = CrossRunReport::new(vec![doc("c1_x", "v", 0, 5.0, 100.0), doc("a1_y", "w", 0, 1.0, 10.0)]);
        let text = render_table(&report);
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("a1_y"));
        let csv = render_table_csv(&report).unwrap();
        assert!(csv.starts_with("benchmark_id,label,methodology,runs,valid_runs,mean_latency"));
    }
}
