#![allow(dead_code)]

use std::path::Path;

use graphperf::descriptor::{capture_environment, emit_results, Category, ExecutorRecord, ResultsDocument, SCHEMA_VERSION};
use graphperf::metrics::{summarize, Methodology, MetricsSummary};

/// A results document with the given mean latency and throughput.
pub fn doc(id: &str, label: &str, run: u32, m: Methodology, mean_ms: f64, throughput: f64) -> ResultsDocument {
    let mut summary: MetricsSummary = summarize(&[], 0, 1, 0).unwrap();
    summary.mean_latency_ms = Some(mean_ms);
    summary.max_latency_ms = Some(mean_ms);
    summary.throughput_msgs_per_s = throughput;
    ResultsDocument {
        schema: SCHEMA_VERSION,
        benchmark_id: id.into(),
        category: Category::from_letter(id.chars().next().unwrap()).unwrap(),
        label: label.into(),
        run,
        methodology: m,
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

pub fn write_doc(dir: &Path, d: &ResultsDocument) {
    let p = dir
        .join(&d.benchmark_id)
        .join(format!("{}-run{}-{}.yaml", d.label, d.run, d.methodology));
    emit_results(d, &p).unwrap();
}

/// Run the CLI in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("graphperf").chain(args.iter().copied());
    let code = graphperf_cli::run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
