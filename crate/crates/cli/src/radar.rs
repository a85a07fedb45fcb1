//! Radar plots: one axis per benchmark, one polygon per (label, methodology).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use graphperf::descriptor::{Category, ResultsDocument};
use graphperf::metrics::{format_significant, Methodology, Metric};
use thiserror::Error;

use crate::results::CrossRunReport;
use crate::svg::Svg;

/// Smallest plotted radius, so a zero value still leaves a visible vertex.
pub const MIN_RADIUS: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum RadarError {
    #[error("category {category} has {found} benchmarks with results; a radar needs at least 3")]
    TooFewAxes { category: Category, found: usize },
    #[error("metric {0} is absent from every result in the category")]
    MetricAbsentEverywhere(Metric),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarSeries {
    pub label: String,
    pub methodology: Methodology,
    /// Headline value per axis, `None` where this variant has no value.
    pub raw: Vec<Option<f64>>,
    /// Normalized radius per axis, in (0, 1].
    pub radii: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarPlot {
    pub category: Category,
    pub metric: Metric,
    /// Benchmark ids, clockwise from 12 o'clock.
    pub axes: Vec<String>,
    pub series: Vec<RadarSeries>,
}

/// Angle of axis `i` of `n`, starting straight up and going clockwise in
/// screen coordinates (y grows downwards).
pub fn axis_angle(i: usize, n: usize) -> f64 {
    -PI / 2.0 + 2.0 * PI * i as f64 / n as f64
}

/// Per-axis normalization. Lower-is-better metrics divide by the axis
/// maximum; higher-is-better metrics are inverted (axis minimum over value)
/// so a smaller polygon always reads as better.
pub fn normalize(metric: Metric, values: &[Option<f64>]) -> Vec<Option<f64>> {
    let present = values.iter().flatten().copied();
    if metric.higher_is_better() {
        let min = present.fold(f64::INFINITY, f64::min);
        values
            .iter()
            .map(|v| {
                v.map(|v| {
                    if v <= 0.0 {
                        1.0
                    } else {
                        (min / v).clamp(MIN_RADIUS, 1.0)
                    }
                })
            })
            .collect()
    } else {
        let max = present.fold(0.0f64, f64::max);
        values
            .iter()
            .map(|v| v.map(|v| if max > 0.0 { (v / max).clamp(MIN_RADIUS, 1.0) } else { 1.0 }))
            .collect()
    }
}

impl RadarPlot {
    pub fn build(docs: Vec<ResultsDocument>, category: Category, metric: Metric) -> Result<Self, RadarError> {
        let docs: Vec<ResultsDocument> = docs.into_iter().filter(|d| d.category == category).collect();
        let report = CrossRunReport::new(docs);
        let axes: Vec<String> = report.benchmark_ids().into_iter().map(str::to_owned).collect();
        if axes.len() < 3 {
            return Err(RadarError::TooFewAxes {
                category,
                found: axes.len(),
            });
        }
        let variants: BTreeSet<(String, Methodology)> =
            report.series.keys().map(|(_, l, m)| (l.clone(), *m)).collect();
        let mut raw: BTreeMap<(String, Methodology), Vec<Option<f64>>> = BTreeMap::new();
        for v in &variants {
            let row = axes
                .iter()
                .map(|id| {
                    report
                        .series
                        .get(&(id.clone(), v.0.clone(), v.1))
                        .and_then(|s| s.headline(metric))
                })
                .collect();
            raw.insert(v.clone(), row);
        }
        if raw.values().flatten().all(Option::is_none) {
            return Err(RadarError::MetricAbsentEverywhere(metric));
        }
        let keys: Vec<_> = raw.keys().cloned().collect();
        let mut radii: Vec<Vec<Option<f64>>> = vec![Vec::new(); keys.len()];
        for a in 0..axes.len() {
            let column: Vec<Option<f64>> = raw.values().map(|row| row[a]).collect();
            for (s, r) in normalize(metric, &column).into_iter().enumerate() {
                radii[s].push(r);
            }
        }
        let series = keys
            .into_iter()
            .zip(radii)
            .map(|((label, methodology), radii)| RadarSeries {
                raw: raw[&(label.clone(), methodology)].clone(),
                label,
                methodology,
                radii,
            })
            .collect();
        Ok(RadarPlot {
            category,
            metric,
            axes,
            series,
        })
    }

    /// Vertex coordinates of a series on a plot of radius `scale` centred at
    /// `(cx, cy)`; axes without a value are skipped.
    pub fn vertices(&self, series: &RadarSeries, (cx, cy): (f64, f64), scale: f64) -> Vec<(f64, f64)> {
        let n = self.axes.len();
        series
            .radii
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let r = (*r)?;
                let a = axis_angle(i, n);
                Some((cx + scale * r * a.cos(), cy + scale * r * a.sin()))
            })
            .collect()
    }

    pub fn to_svg(&self) -> String {
        const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let (cx, cy, scale) = (300.0, 290.0, 200.0);
        let table_top = 560.0;
        let row_h = 16.0;
        let height = table_top + row_h * (self.series.len() + 2) as f64 + 20.0;
        let mut svg = Svg::new(760.0, height);
        let direction = if self.metric.higher_is_better() { "inverted, " } else { "" };
        svg.text(
            10.0,
            22.0,
            14.0,
            "start",
            &format!(
                "{} ({}): {} ({direction}normalized per axis, smaller is better)",
                self.category, self.category.letter(), self.metric
            ),
        );
        let n = self.axes.len();
        for ring in [0.25, 0.5, 0.75, 1.0] {
            let pts: Vec<String> = (0..n)
                .map(|i| {
                    let a = axis_angle(i, n);
                    format!("{:.2},{:.2}", cx + scale * ring * a.cos(), cy + scale * ring * a.sin())
                })
                .collect();
            let _ = writeln!(svg.body, r##"<polygon points="{}" fill="none" stroke="#dddddd"/>"##, pts.join(" "));
        }
        for (i, id) in self.axes.iter().enumerate() {
            let a = axis_angle(i, n);
            let end = (cx + scale * a.cos(), cy + scale * a.sin());
            svg.line((cx, cy), end, "#999999");
            let anchor = if a.cos().abs() < 0.2 { "middle" } else if a.cos() > 0.0 { "start" } else { "end" };
            svg.text(cx + (scale + 14.0) * a.cos(), cy + (scale + 14.0) * a.sin() + 4.0, 11.0, anchor, id);
        }
        let labels: Vec<&str> = {
            let mut l: Vec<&str> = self.series.iter().map(|s| s.label.as_str()).collect();
            l.dedup();
            l
        };
        let colour = |label: &str| PALETTE[labels.iter().position(|l| *l == label).unwrap_or(0) % PALETTE.len()];
        for s in &self.series {
            let pts: Vec<String> =
                self.vertices(s, (cx, cy), scale).iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = match s.methodology {
                Methodology::GreyBox => r#" stroke-dasharray="6 4""#,
                Methodology::BlackBox => "",
            };
            let _ = writeln!(
                svg.body,
                r#"<polygon class="series" data-label="{}" data-methodology="{}" points="{}" fill="{c}" fill-opacity="0.08" stroke="{c}" stroke-width="2"{dash}/>"#,
                crate::svg::escape(&s.label),
                s.methodology,
                pts.join(" "),
                c = colour(&s.label)
            );
        }
        // Legend.
        for (k, s) in self.series.iter().enumerate() {
            let y = 50.0 + 18.0 * k as f64;
            let dash = if s.methodology == Methodology::GreyBox { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg.body,
                r#"<line x1="560" y1="{y:.2}" x2="590" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
                colour(&s.label)
            );
            svg.text(596.0, y + 4.0, 11.0, "start", &format!("{} [{}]", s.label, s.methodology));
        }
        // Raw data table.
        let mut header = String::from("variant");
        for id in &self.axes {
            let _ = write!(header, " | {id}");
        }
        svg.text(10.0, table_top, 11.0, "start", &format!("raw {} ({}): {header}", self.metric, self.metric.unit()));
        for (k, s) in self.series.iter().enumerate() {
            let cells: Vec<String> = s
                .raw
                .iter()
                .map(|v| v.map_or_else(|| "-".into(), |v| format_significant(v, 4)))
                .collect();
            svg.text(
                10.0,
                table_top + row_h * (k + 1) as f64,
                11.0,
                "start",
                &format!("{} [{}] | {}", s.label, s.methodology, cells.join(" | ")),
            );
        }
        svg.finish()
    }
}
