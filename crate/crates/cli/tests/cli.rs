mod common;

use std::path::Path;

use common::{cli, doc, write_doc};
use graphperf::descriptor::{parse_results, Category};
use graphperf::metrics::{Methodology, Metric};
use graphperf_cli::radar::RadarPlot;
use graphperf_cli::results::{headline, CrossRunReport};
use proptest::prelude::*;

const BLACK: Methodology = Methodology::BlackBox;

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn compare_reports_173_to_15_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_doc(&a, &doc("a5_localization_chain", "cpu", 0, BLACK, 173.0, 5.0));
    write_doc(&b, &doc("a5_localization_chain", "fpga", 0, BLACK, 15.0, 60.0));
    let csv_dir = dir.path().join("cmp");
    let (code, out, err) = cli(&[
        "compare", "--a", p(&a), "--b", p(&b), "--label-a", "cpu", "--label-b", "fpga", "--out", p(&csv_dir), "--svg",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("11.5x"), "{out}");
    let csv = std::fs::read_to_string(csv_dir.join("comparison.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",11.5,fpga"), "{csv}");
    assert!(csv_dir.join("comparison.svg").exists());
}

#[test]
fn compare_identical_sets() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["c1_a", "c2_b"] {
        write_doc(dir.path(), &doc(id, "x", 0, BLACK, 3.0, 7.0));
    }
    let (code, out, _) = cli(&["compare", "--a", p(dir.path()), "--b", p(dir.path())]);
    assert_eq!(code, 0);
    assert_eq!(out.matches(" 1x ").count() + out.matches(" 1.00x ").count(), 2, "{out}");
}

#[test]
fn compare_disjoint_sets_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_doc(&a, &doc("c1_a", "x", 0, BLACK, 3.0, 7.0));
    write_doc(&b, &doc("c2_b", "x", 0, BLACK, 3.0, 7.0));
    let (code, _, err) = cli(&["compare", "--a", p(&a), "--b", p(&b)]);
    assert_eq!(code, 2);
    assert!(err.contains("different benchmarks"), "{err}");
}

#[test]
fn radar_needs_three_axes() {
    let dir = tempfile::tempdir().unwrap();
    write_doc(dir.path(), &doc("c1_a", "x", 0, BLACK, 3.0, 7.0));
    write_doc(dir.path(), &doc("c2_b", "x", 0, BLACK, 3.0, 7.0));
    let (code, _, err) = cli(&["report", "radar", p(dir.path()), "--category", "control"]);
    assert_eq!(code, 2);
    assert!(err.contains("at least 3"), "{err}");
}

#[test]
fn radar_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    for (i, id) in ["c1_a", "c2_b", "c3_c"].iter().enumerate() {
        write_doc(dir.path(), &doc(id, "x", 0, BLACK, 1.0 + i as f64, 7.0));
        write_doc(dir.path(), &doc(id, "y", 0, Methodology::GreyBox, 2.0, 7.0));
    }
    let svg = dir.path().join("out/radar.svg");
    let (code, _, err) = cli(&["report", "radar", p(dir.path()), "--category", "c", "--out", p(&svg)]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(svg).unwrap();
    assert_eq!(text.matches(r#"class="series""#).count(), 2);
    assert!(text.contains("stroke-dasharray"));
}

#[test]
fn table_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_doc(dir.path(), &doc("c1_a", "x", 0, BLACK, 3.0, 7.0));
    write_doc(dir.path(), &doc("c1_a", "x", 1, BLACK, 5.0, 6.0));
    let csv = dir.path().join("t.csv");
    let (code, out, _) = cli(&["report", "table", p(dir.path()), "--csv", p(&csv)]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().contains("5.000"), "{out}");
    let csv = std::fs::read_to_string(csv).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("c1_a,x,black_box,2,2,5,"), "{csv}");
}

#[test]
fn list_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = cli(&["list", p(dir.path())]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1, "header only: {out}");
}

#[test]
fn list_reports_bad_descriptors_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = cli(&["suite", p(dir.path())]);
    assert_eq!(code, 0);
    let (code, out, _) = cli(&["list", p(dir.path())]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert!(rows.len() >= 5);
    let categories: std::collections::BTreeSet<&str> =
        rows.iter().map(|r| r.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(categories.len(), 4);

    let small = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(small.path().join("good")).unwrap();
    std::fs::create_dir_all(small.path().join("bad")).unwrap();
    std::fs::copy(
        dir.path().join("c1_pid_step/benchmark.yaml"),
        small.path().join("good/benchmark.yaml"),
    )
    .unwrap();
    std::fs::write(small.path().join("bad/benchmark.yaml"), "schema: 1\nid: nonsense\n").unwrap();
    let (code, out, _) = cli(&["list", p(small.path())]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3, "{out}");
    assert!(out.lines().any(|l| l.starts_with("c1_pid_step")));
    assert!(out.lines().any(|l| l.starts_with("error")));
}

#[test]
fn run_smoke_three_reps() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let (code, out, err) = cli(&["run", "c1_pid_step", "--reps", "3", "--out", p(&out_dir)]);
    assert_eq!(code, 0, "{out}{err}");
    let mut files: Vec<_> = std::fs::read_dir(out_dir.join("c1_pid_step"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["default-run0-black_box.yaml", "default-run1-black_box.yaml", "default-run2-black_box.yaml"]);
    for f in files {
        let d = parse_results(&std::fs::read_to_string(out_dir.join("c1_pid_step").join(f)).unwrap()).unwrap();
        assert!(d.summary.valid);
        assert!(d.summary.mean_latency_ms.is_some());
    }
}

#[test]
fn run_package_directory_with_both_methodologies() {
    let dir = tempfile::tempdir().unwrap();
    cli(&["suite", p(dir.path())]);
    let pkg = dir.path().join("c3_busy_loop_2ms");
    std::fs::remove_file(pkg.join("input.gpl")).unwrap();
    let out_dir = dir.path().join("results");
    let traces = dir.path().join("traces");
    std::env::set_var("GRAPHPERF_TRACE_DIR", &traces);
    let (code, out, err) = cli(&["run", p(&pkg), "--methodology", "both", "--out", p(&out_dir), "--label", "cpu"]);
    std::env::remove_var("GRAPHPERF_TRACE_DIR");
    assert_eq!(code, 0, "{out}{err}");
    assert!(pkg.join("input.gpl").exists(), "reference log regenerated");
    let trace = traces.join("c3_busy_loop_2ms-cpu-run0.gpt");
    assert!(trace.exists());
    for m in ["grey_box", "black_box"] {
        assert!(out_dir.join(format!("c3_busy_loop_2ms/cpu-run0-{m}.yaml")).exists());
    }
    let (code, out, err) = cli(&[
        "trace", "analyze", p(&trace), "--source-topic", "input", "--sink-node", "busy",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("sample_count: 190"), "{out}");
}

#[test]
fn refused_plans_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("r");
    let (code, _, _) = cli(&["run", "c1_pid_step", "--reps", "0", "--out", p(&out_dir)]);
    assert_eq!(code, 2);
    let (code, _, err) = cli(&["run", "c1_pid_step", "--methodology", "both", "--no-tracer", "--out", p(&out_dir)]);
    assert_eq!(code, 2, "{err}");
    assert!(!out_dir.exists(), "nothing executed");
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["--version"]).0, 0);
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["run", "no_such_benchmark"]).0, 3);
    assert_eq!(cli(&["list", "/definitely/not/here"]).0, 3);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.yaml"), "schema: [").unwrap();
    assert_eq!(cli(&["report", "table", p(&dir.path().join("broken.yaml"))]).0, 3);
}

#[test]
fn run_is_deterministic_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(k.to_string());
        assert_eq!(cli(&["run", "c1_pid_step", "--seed", "5", "--out", p(&out_dir)]).0, 0);
        let text = std::fs::read_to_string(out_dir.join("c1_pid_step/default-run0-black_box.yaml")).unwrap();
        docs.push(parse_results(&text).unwrap());
    }
    let strip = |d: &graphperf::descriptor::ResultsDocument| {
        (d.benchmark_id.clone(), d.seed, d.summary.sample_count, d.summary.lost_count, d.topic_table.clone())
    };
    assert_eq!(strip(&docs[0]), strip(&docs[1]));
}

fn arb_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1e4, 1..20)
}

proptest! {
    #[test]
    fn headline_only_moves_conservatively(values in arb_values(), extra in 0.001f64..1e4) {
        for metric in [Metric::MeanLatency, Metric::Throughput] {
            let before = headline(metric, values.iter().copied()).unwrap();
            let after = headline(metric, values.iter().copied().chain([extra])).unwrap();
            if metric.higher_is_better() {
                prop_assert!(after <= before);
            } else {
                prop_assert!(after >= before);
            }
        }
    }

    #[test]
    fn radar_radii_are_normalized(
        values in prop::collection::vec(prop::collection::vec(0.0f64..1e3, 3..7), 1..4),
        throughput in any::<bool>(),
    ) {
        let n = values.iter().map(Vec::len).min().unwrap();
        let ids: Vec<String> = (0..n).map(|i| format!("b{}_axis", i + 1)).collect();
        let metric = if throughput { Metric::Throughput } else { Metric::MeanLatency };
        let mut docs = Vec::new();
        for (s, row) in values.iter().enumerate() {
            for (id, v) in ids.iter().zip(row) {
                docs.push(doc(id, &format!("v{s}"), 0, BLACK, *v, *v));
            }
        }
        let plot = RadarPlot::build(docs, Category::Localization, metric).unwrap();
        for a in 0..n {
            let radii: Vec<f64> = plot.series.iter().map(|s| s.radii[a].unwrap()).collect();
            prop_assert!(radii.iter().all(|r| *r > 0.0 && *r <= 1.0));
            prop_assert!(radii.contains(&1.0));
        }
    }

    #[test]
    fn dominating_variant_plots_inside(
        b in prop::collection::vec(1.0f64..1e3, 3..7),
        shrink in prop::collection::vec(0.05f64..0.95, 7),
    ) {
        let ids: Vec<String> = (0..b.len()).map(|i| format!("d{}_axis", i + 1)).collect();
        let mut docs = Vec::new();
        for (i, id) in ids.iter().enumerate() {
            docs.push(doc(id, "a", 0, BLACK, b[i] * shrink[i], 1.0 / (b[i] * shrink[i])));
            docs.push(doc(id, "b", 0, BLACK, b[i], 1.0 / b[i]));
        }
        for metric in [Metric::MeanLatency, Metric::Throughput] {
            let plot = RadarPlot::build(docs.clone(), Category::Manipulation, metric).unwrap();
            let (sa, sb) = (&plot.series[0], &plot.series[1]);
            prop_assert_eq!(&sa.label, "a");
            for (ra, rb) in sa.radii.iter().zip(&sb.radii) {
                prop_assert!(ra.unwrap() < rb.unwrap());
            }
        }
    }
}

#[test]
fn cross_run_report_keeps_per_run_values() {
    let docs = vec![doc("c1_a", "x", 1, BLACK, 4.0, 1.0), doc("c1_a", "x", 0, BLACK, 2.0, 1.0)];
    let report = CrossRunReport::new(docs);
    let s = report.series.values().next().unwrap();
    assert_eq!(s.per_run(Metric::MeanLatency), [Some(2.0), Some(4.0)]);
    assert_eq!(s.headline(Metric::MeanLatency), Some(4.0));
}
