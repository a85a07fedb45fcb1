//! Subcommand implementations. Each writes its report to `out` and
//! diagnostics to `err`, returning a [`CliError`] for the exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use graphperf::descriptor::{
    emit_results, load_descriptor, serialize_descriptor, BenchmarkDescriptor, ExecutorRecord, ResultsDocument,
};
use graphperf::harness::{load_log, write_log, MessageLog};
use graphperf::metrics::{summarize, Methodology, Metric, PowerProvider};
use graphperf::runner::{run_benchmark, MethodologySelection, RunOptions};
use graphperf::tracer::{greybox_latencies, read_trace, subject_hash, EventType, TraceError};
use graphperf::workloads::{reference_graphs, ReferenceBenchmark, REFERENCE_LOG_FILE};
use walkdir::WalkDir;

use crate::args::{CompareArgs, PowerArg, RunArgs};
use crate::compare::compare;
use crate::error::{CliError, CliResult, IoContext};
use crate::radar::RadarPlot;
use crate::results::{align, load_results, render_table, render_table_csv, CrossRunReport};

/// Env var that redirects trace files away from the results directory.
pub const TRACE_DIR_ENV: &str = "GRAPHPERF_TRACE_DIR";
pub const DESCRIPTOR_FILE: &str = "benchmark.yaml";

/// A benchmark ready to run: descriptor plus input log.
pub struct Target {
    pub descriptor: BenchmarkDescriptor,
    pub log: MessageLog,
}

fn reference(id: &str) -> Option<ReferenceBenchmark> {
    reference_graphs().into_iter().find(|r| r.descriptor.id == id)
}

fn descriptor_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.io_context(|| format!("walking {}", dir.display()))?;
        if entry.file_type().is_file() && entry.file_name() == DESCRIPTOR_FILE {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn load_package(path: &Path) -> CliResult<Target> {
    let descriptor = load_descriptor(path).io_context(|| format!("loading {}", path.display()))?;
    let log_path = path.parent().unwrap_or(Path::new(".")).join(&descriptor.input.log);
    let log = if log_path.exists() {
        load_log(&log_path).io_context(|| format!("loading {}", log_path.display()))?
    } else {
        // Reference packages may ship without their generated input.
        let r = reference(&descriptor.id)
            .filter(|r| r.descriptor.input.log == descriptor.input.log)
            .ok_or_else(|| CliError::io(anyhow::anyhow!("input log {} does not exist", log_path.display())))?;
        write_log(&r.log, &log_path).io_context(|| format!("writing {}", log_path.display()))?;
        r.log
    };
    Ok(Target { descriptor, log })
}

/// Resolve run targets: descriptor files, package or suite directories, or
/// reference benchmark ids.
pub fn resolve_targets(targets: &[String]) -> CliResult<Vec<Target>> {
    let mut out = Vec::new();
    for t in targets {
        let path = Path::new(t);
        if path.is_file() {
            out.push(load_package(path)?);
        } else if path.is_dir() {
            let files = descriptor_files(path)?;
            if files.is_empty() {
                return Err(CliError::io(anyhow::anyhow!("no {DESCRIPTOR_FILE} under {}", path.display())));
            }
            for f in files {
                out.push(load_package(&f)?);
            }
        } else if let Some(r) = reference(t) {
            out.push(Target {
                descriptor: r.descriptor,
                log: r.log,
            });
        } else {
            return Err(CliError::io(anyhow::anyhow!(
                "{t}: neither a descriptor, a directory nor a reference benchmark id"
            )));
        }
    }
    Ok(out)
}

fn power_provider(arg: &PowerArg) -> CliResult<PowerProvider> {
    Ok(match arg {
        PowerArg::None => PowerProvider::None,
        PowerArg::Constant(w) => PowerProvider::constant(*w).map_err(|e| CliError::usage(e.to_string()))?,
        PowerArg::File(p) => PowerProvider::file(p).io_context(|| format!("reading power file {}", p.display()))?,
        PowerArg::System => PowerProvider::system(),
    })
}

pub fn results_path(out: &Path, id: &str, label: &str, run: u32, m: Methodology) -> PathBuf {
    out.join(id).join(format!("{label}-run{run}-{m}.yaml"))
}

fn trace_path(out: &Path, trace_dir: Option<&Path>, id: &str, label: &str, run: u32) -> PathBuf {
    match trace_dir {
        Some(dir) => dir.join(format!("{id}-{label}-run{run}.gpt")),
        None => out.join(id).join(format!("{label}-run{run}.gpt")),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let selection: MethodologySelection = args.methodology.into();
    if args.no_tracer && selection != MethodologySelection::Black {
        return Err(CliError::usage(format!(
            "--methodology {} needs the tracer; drop --no-tracer or use --methodology black",
            format!("{:?}", args.methodology).to_lowercase()
        )));
    }
    if args.label.is_empty() || args.label.contains(['/', '\\']) {
        return Err(CliError::usage(format!("bad label {:?}", args.label)));
    }
    let power = power_provider(&args.power)?;
    let targets = resolve_targets(&args.targets)?;
    let trace_dir = std::env::var_os(TRACE_DIR_ENV).map(PathBuf::from);

    let mut options = RunOptions::new(selection);
    // Black-box runs stay uninstrumented unless grey-box is also wanted.
    options.tracer_enabled = !args.no_tracer && selection != MethodologySelection::Black;
    if let Some(c) = args.trace_capacity {
        options.trace_capacity = c;
    }
    options.workers = args.workers.map(|w| w as usize);
    options.seed = args.seed;
    options.power = power;

    let mut bad_runs = 0usize;
    for target in &targets {
        let d = &target.descriptor;
        for run in 0..args.reps {
            let mut opts = options.clone();
            if opts.tracer_enabled {
                let p = trace_path(&args.out, trace_dir.as_deref(), &d.id, &args.label, run);
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent).io_context(|| format!("creating {}", parent.display()))?;
                }
                opts.trace_path = Some(p);
            }
            let outcome = match run_benchmark(d, &target.log, &opts) {
                Ok(o) => o,
                Err(e) => {
                    bad_runs += 1;
                    let _ = writeln!(err, "{} run {run}: {e}", d.id);
                    continue;
                }
            };
            for (m, summary) in &outcome.summaries {
                let mut doc = ResultsDocument::new(d, *m, summary.clone(), outcome.environment.clone());
                doc.label = args.label.clone();
                doc.run = run;
                doc.seed = args.seed;
                doc.timestamp = outcome.timestamp.clone();
                doc.topic_table = outcome.topic_table.clone();
                doc.executor = ExecutorRecord {
                    workers: outcome.executor.workers,
                    callbacks_invoked: outcome.executor.callbacks_invoked,
                    messages_dropped: outcome.executor.messages_dropped,
                    wall_time_s: outcome.executor.wall_time.as_secs_f64(),
                };
                doc.duplicate_count = outcome.duplicate_count;
                doc.phantom_count = outcome.phantom_count;
                doc.trace_overflow = outcome.trace_overflow;
                doc.trace_file = opts.trace_path.as_ref().map(|p| p.display().to_string());
                let path = results_path(&args.out, &d.id, &args.label, run, *m);
                emit_results(&doc, &path).io_context(|| format!("writing {}", path.display()))?;
                let status = if summary.valid {
                    "valid".to_owned()
                } else {
                    format!("INVALID ({})", summary.invalid_reasons.join(", "))
                };
                let mean = summary.mean_latency_ms.map_or_else(|| "-".into(), |v| format!("{v:.3} ms"));
                let _ = writeln!(
                    out,
                    "{} run {run} {m}: mean {mean}, {:.2} msgs/s, loss {:.3}, {status} -> {}",
                    d.id,
                    summary.throughput_msgs_per_s,
                    summary.loss_rate,
                    path.display()
                );
            }
            if let Some(f) = &outcome.failure {
                let _ = writeln!(err, "{} run {run}: {f}", d.id);
            }
            if !outcome.valid() {
                bad_runs += 1;
            }
        }
    }
    if bad_runs > 0 {
        return Err(CliError::Invalid(format!("{bad_runs} run(s) invalid or failed")));
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    let a = load_results(&args.a)?;
    let b = load_results(&args.b)?;
    let c = compare(&a, &b, &args.label_a, &args.label_b, args.metric).map_err(|e| CliError::usage(e.to_string()))?;
    let _ = write!(out, "{}", c.render_table());
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).io_context(|| format!("creating {}", dir.display()))?;
        let csv = dir.join("comparison.csv");
        std::fs::write(&csv, c.render_csv()).io_context(|| format!("writing {}", csv.display()))?;
        if args.svg {
            let svg = dir.join("comparison.svg");
            std::fs::write(&svg, c.render_bar_svg()).io_context(|| format!("writing {}", svg.display()))?;
        }
    } else if args.svg {
        return Err(CliError::usage("--svg needs --out"));
    }
    Ok(())
}

pub fn cmd_report_radar(
    results: &[PathBuf],
    category: graphperf::descriptor::Category,
    metric: Metric,
    svg_out: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let docs = load_results(results)?;
    let plot = RadarPlot::build(docs, category, metric).map_err(|e| CliError::usage(e.to_string()))?;
    let svg = plot.to_svg();
    match svg_out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).io_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, svg).io_context(|| format!("writing {}", p.display()))?;
        }
        None => {
            let _ = out.write_all(svg.as_bytes());
        }
    }
    Ok(())
}

pub fn cmd_report_table(results: &[PathBuf], csv: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let report = CrossRunReport::new(load_results(results)?);
    let _ = write!(out, "{}", render_table(&report));
    if let Some(p) = csv {
        std::fs::write(p, render_table_csv(&report)?).io_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// One row per descriptor; unparsable descriptors become error rows.
pub fn cmd_list(dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    if !dir.is_dir() {
        return Err(CliError::io(anyhow::anyhow!("{} is not a directory", dir.display())));
    }
    let mut rows = vec![vec!["id".to_owned(), "category".into(), "metrics".into(), "path".into()]];
    let mut errors = Vec::new();
    for f in descriptor_files(dir)? {
        match load_descriptor(&f) {
            Ok(d) => rows.push(vec![
                d.id.clone(),
                d.category.to_string(),
                d.metrics_requested.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
                f.display().to_string(),
            ]),
            Err(e) => errors.push(format!("error  {}: {e}", f.display())),
        }
    }
    let _ = write!(out, "{}", align(&rows));
    for e in errors {
        let _ = writeln!(out, "{e}");
    }
    Ok(())
}

pub fn cmd_trace_analyze(
    trace: &Path,
    source_topic: &str,
    sink_node: &str,
    warmup: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let readout = read_trace(trace).io_context(|| format!("reading {}", trace.display()))?;
    for w in &readout.warnings {
        let _ = writeln!(err, "warning: {w:?}");
    }
    let source = subject_hash(source_topic);
    let result = match greybox_latencies(&readout.events, source, subject_hash(sink_node), warmup) {
        Ok(r) => r,
        Err(e @ TraceError::NegativeLatency { .. }) => return Err(CliError::Invalid(e.to_string())),
        Err(e) => return Err(CliError::io(e)),
    };
    let first_publish = readout
        .events
        .iter()
        .filter(|e| e.event_type == EventType::Publish && e.subject_hash == source)
        .map(|e| e.timestamp)
        .min();
    let duration = match (first_publish, result.last_sink_end) {
        (Some(s), Some(e)) => e.saturating_sub(s).max(1),
        _ => 0,
    };
    let summary = summarize(&result.samples, result.lost, duration, result.delivered)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let yaml = serde_yaml::to_string(&summary).io_context(|| "serializing summary".into())?;
    let _ = writeln!(out, "# grey-box latencies, {} events, warm-up {warmup}", readout.events.len());
    let _ = write!(out, "{yaml}");
    Ok(())
}

/// Write every reference benchmark as a package under `dir`.
pub fn cmd_suite(dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    for r in reference_graphs() {
        let pkg = dir.join(&r.descriptor.id);
        std::fs::create_dir_all(&pkg).io_context(|| format!("creating {}", pkg.display()))?;
        let desc = pkg.join(DESCRIPTOR_FILE);
        std::fs::write(&desc, serialize_descriptor(&r.descriptor)).io_context(|| format!("writing {}", desc.display()))?;
        let log = pkg.join(REFERENCE_LOG_FILE);
        write_log(&r.log, &log).io_context(|| format!("writing {}", log.display()))?;
        let _ = writeln!(out, "{}", pkg.display());
    }
    Ok(())
}

