//! Two-variant comparison: per-benchmark headlines, speedup and winner.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use graphperf::descriptor::ResultsDocument;
use graphperf::metrics::{format_significant, speedup_values, Methodology, Metric};
use thiserror::Error;

use crate::results::{align, headline};
use crate::svg::Svg;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("result sets cover different benchmarks: only in {label_a}: {only_a:?}; only in {label_b}: {only_b:?}")]
    BenchmarkSetMismatch {
        label_a: String,
        label_b: String,
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("result set {0} is empty")]
    EmptySet(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub benchmark_id: String,
    pub methodology: Methodology,
    pub value_a: Option<f64>,
    pub value_b: Option<f64>,
    /// How many times better b is than a; `None` if either side lacks the metric.
    pub speedup: Option<f64>,
}

impl ComparisonRow {
    pub fn winner<'a>(&self, label_a: &'a str, label_b: &'a str) -> &'a str {
        match self.speedup {
            Some(r) if r > 1.0 => label_b,
            Some(r) if r < 1.0 => label_a,
            Some(_) => "tie",
            None => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub metric: Metric,
    pub rows: Vec<ComparisonRow>,
}

fn side_headline(docs: &[ResultsDocument], id: &str, m: Methodology, metric: Metric) -> Option<f64> {
    headline(
        metric,
        docs.iter()
            .filter(|d| d.benchmark_id == id && d.methodology == m && d.summary.valid)
            .filter_map(|d| metric.value(&d.summary)),
    )
}

/// Compare result sets `a` (baseline) and `b` (candidate) on `metric`.
pub fn compare(
    a: &[ResultsDocument],
    b: &[ResultsDocument],
    label_a: &str,
    label_b: &str,
    metric: Metric,
) -> Result<Comparison, CompareError> {
    if a.is_empty() {
        return Err(CompareError::EmptySet(label_a.into()));
    }
    if b.is_empty() {
        return Err(CompareError::EmptySet(label_b.into()));
    }
    let ids = |docs: &[ResultsDocument]| docs.iter().map(|d| d.benchmark_id.clone()).collect::<BTreeSet<_>>();
    let (ids_a, ids_b) = (ids(a), ids(b));
    if ids_a != ids_b {
        return Err(CompareError::BenchmarkSetMismatch {
            label_a: label_a.into(),
            label_b: label_b.into(),
            only_a: ids_a.difference(&ids_b).cloned().collect(),
            only_b: ids_b.difference(&ids_a).cloned().collect(),
        });
    }
    let mut rows = Vec::new();
    for id in &ids_a {
        for m in [Methodology::GreyBox, Methodology::BlackBox] {
            let has = |docs: &[ResultsDocument]| docs.iter().any(|d| &d.benchmark_id == id && d.methodology == m);
            if !has(a) || !has(b) {
                continue;
            }
            let value_a = side_headline(a, id, m, metric);
            let value_b = side_headline(b, id, m, metric);
            let speedup = match (value_a, value_b) {
                (Some(x), Some(y)) => speedup_values(x, y, metric).ok(),
                _ => None,
            };
            rows.push(ComparisonRow {
                benchmark_id: id.clone(),
                methodology: m,
                value_a,
                value_b,
                speedup,
            });
        }
    }
    Ok(Comparison {
        label_a: label_a.into(),
        label_b: label_b.into(),
        metric,
        rows,
    })
}

fn value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format_significant(v, 4))
}

fn ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |r| format!("{}x", format_significant(r, 3)))
}

impl Comparison {
    pub fn render_table(&self) -> String {
        let unit = self.metric.unit();
        let mut rows = vec![vec![
            "benchmark".to_owned(),
            "methodology".into(),
            format!("{} ({unit})", self.label_a),
            format!("{} ({unit})", self.label_b),
            "speedup".into(),
            "winner".into(),
        ]];
        for r in &self.rows {
            rows.push(vec![
                r.benchmark_id.clone(),
                r.methodology.to_string(),
                value(r.value_a),
                value(r.value_b),
                ratio(r.speedup),
                r.winner(&self.label_a, &self.label_b).to_owned(),
            ]);
        }
        let mut out = format!("{} comparison, {} vs {}\n", self.metric, self.label_a, self.label_b);
        out.push_str(&align(&rows));
        out
    }

    pub fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "benchmark_id", "methodology", "metric", "unit", "label_a", "value_a", "label_b", "value_b", "speedup",
            "winner",
        ];
        w.write_record(header).expect("in-memory csv");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.benchmark_id.as_str(),
                r.methodology.as_str(),
                self.metric.name(),
                self.metric.unit(),
                &self.label_a,
                &opt(r.value_a),
                &self.label_b,
                &opt(r.value_b),
                &r.speedup.map(|s| format_significant(s, 3)).unwrap_or_default(),
                r.winner(&self.label_a, &self.label_b),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    /// Grouped horizontal bars, one pair per benchmark, annotated with the speedup.
    pub fn render_bar_svg(&self) -> String {
        let bar_h = 16.0;
        let group_h = bar_h * 2.0 + 18.0;
        let (left, width) = (220.0, 420.0);
        let height = 60.0 + group_h * self.rows.len() as f64;
        let max = self
            .rows
            .iter()
            .flat_map(|r| [r.value_a, r.value_b])
            .flatten()
            .fold(0.0f64, f64::max);
        let scale = if max > 0.0 { width / max } else { 0.0 };
        let mut svg = Svg::new(left + width + 140.0, height);
        svg.text(10.0, 22.0, 14.0, "start", &format!("{} ({}): {} vs {}", self.metric, self.metric.unit(), self.label_a, self.label_b));
        for (i, r) in self.rows.iter().enumerate() {
            let y = 40.0 + group_h * i as f64;
            svg.text(left - 8.0, y + bar_h + 4.0, 11.0, "end", &format!("{} [{}]", r.benchmark_id, r.methodology));
            for (k, (v, fill)) in [(r.value_a, "#9e9e9e"), (r.value_b, "#1f77b4")].into_iter().enumerate() {
                let yy = y + k as f64 * bar_h;
                let w = v.unwrap_or(0.0) * scale;
                let _ = write!(
                    svg.body,
                    r#"<rect x="{left:.2}" y="{yy:.2}" width="{w:.2}" height="{:.2}" fill="{fill}"/>"#,
                    bar_h - 2.0
                );
                svg.body.push('\n');
                svg.text(left + w + 4.0, yy + bar_h - 4.0, 10.0, "start", &value(v));
            }
            svg.text(left + width + 130.0, y + bar_h + 4.0, 12.0, "end", &ratio(r.speedup));
        }
        svg.finish()
    }
}
