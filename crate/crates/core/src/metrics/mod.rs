//! Latency statistics, throughput, power, energy and performance-per-watt.
//!
//! Latencies are nanoseconds everywhere until they land in a
//! [`MetricsSummary`], which is the reporting boundary and carries
//! milliseconds.

mod power;

pub use power::{
    integrate_power, load_power_csv, parse_power_csv, PowerIntegration, PowerProvider, PowerSample,
    PowerSampler,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("run duration must be positive when messages were delivered")]
    ZeroDuration,
    #[error("power is absent from the summary")]
    AbsentPower,
    #[error("metric {0} is absent")]
    MetricAbsent(Metric),
    #[error("division by zero comparing {0}")]
    DivisionByZero(Metric),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("invalid power data: {0}")]
    BadPowerData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Methodology {
    GreyBox,
    BlackBox,
}

impl Methodology {
    pub fn as_str(self) -> &'static str {
        match self {
            Methodology::GreyBox => "grey_box",
            Methodology::BlackBox => "black_box",
        }
    }
}

impl fmt::Display for Methodology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One end-to-end latency observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatencySample {
    pub message_id: u64,
    pub latency_ns: u64,
    pub methodology: Methodology,
}

/// Per-run statistics as written to results files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSummary {
    pub sample_count: u64,
    pub lost_count: u64,
    pub loss_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_latency_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p50_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p95_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p99_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    pub throughput_msgs_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msgs_per_joule: Option<f64>,
    pub valid: bool,
    pub invalid_reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricsSummary {
    /// Mark the run invalid for `reason` (idempotent per reason).
    pub fn invalidate(&mut self, reason: &str) {
        self.valid = false;
        if !self.invalid_reasons.iter().any(|r| r == reason) {
            self.invalid_reasons.push(reason.to_owned());
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Attach integrated power and derive performance-per-watt.
    pub fn apply_power(&mut self, power: &PowerIntegration) {
        self.mean_power_w = power.mean_power_w;
        self.energy_j = power.energy_j;
        self.msgs_per_joule = efficiency(self).ok();
        if let Some(reason) = &power.reason {
            self.note(reason.clone());
        }
    }
}

const NS_PER_MS: f64 = 1e6;
const NS_PER_S: f64 = 1e9;

/// Nearest-rank percentile: the value at 1-based index ceil(p/100 * n) of
/// `sorted`. `percent` must be in 1..=100.
pub fn nearest_rank(sorted: &[u64], percent: u32) -> Option<u64> {
    if sorted.is_empty() || !(1..=100).contains(&percent) {
        return None;
    }
    let n = sorted.len() as u64;
    let rank = (u64::from(percent) * n).div_ceil(100).max(1);
    sorted.get(rank as usize - 1).copied()
}

/// Reduce one run's latency samples and counts to a [`MetricsSummary`].
pub fn summarize(
    samples: &[LatencySample],
    lost: u64,
    run_duration_ns: u64,
    delivered: u64,
) -> Result<MetricsSummary, MetricsError> {
    if delivered > 0 && run_duration_ns == 0 {
        return Err(MetricsError::ZeroDuration);
    }
    let mut sorted: Vec<u64> = samples.iter().map(|s| s.latency_ns).collect();
    sorted.sort_unstable();
    let n = sorted.len() as u64;
    let considered = n + lost;

    let to_ms = |ns: u64| ns as f64 / NS_PER_MS;
    let (mean, p50, p95, p99, max) = if let Some(&max_ns) = sorted.last() {
        let sum: u128 = sorted.iter().map(|&v| u128::from(v)).sum();
        let mean_ns = (sum as f64 / n as f64).min(max_ns as f64);
        (
            Some(mean_ns / NS_PER_MS),
            nearest_rank(&sorted, 50).map(to_ms),
            nearest_rank(&sorted, 95).map(to_ms),
            nearest_rank(&sorted, 99).map(to_ms),
            Some(to_ms(max_ns)),
        )
    } else {
        (None, None, None, None, None)
    };

    Ok(MetricsSummary {
        sample_count: n,
        lost_count: lost,
        loss_rate: if considered == 0 {
            0.0
        } else {
            lost as f64 / considered as f64
        },
        mean_latency_ms: mean,
        p50_ms: p50,
        p95_ms: p95,
        p99_ms: p99,
        max_latency_ms: max,
        throughput_msgs_per_s: if run_duration_ns == 0 {
            0.0
        } else {
            delivered as f64 / (run_duration_ns as f64 / NS_PER_S)
        },
        mean_power_w: None,
        energy_j: None,
        msgs_per_joule: None,
        valid: true,
        invalid_reasons: Vec::new(),
        notes: Vec::new(),
    })
}

/// Messages per joule: throughput divided by mean power.
pub fn efficiency(summary: &MetricsSummary) -> Result<f64, MetricsError> {
    let watts = summary.mean_power_w.ok_or(MetricsError::AbsentPower)?;
    if watts <= 0.0 {
        return Err(MetricsError::DivisionByZero(Metric::Efficiency));
    }
    Ok(summary.throughput_msgs_per_s / watts)
}

/// A reportable metric of a [`MetricsSummary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MeanLatency,
    P50Latency,
    P95Latency,
    P99Latency,
    MaxLatency,
    Throughput,
    MeanPower,
    Energy,
    Efficiency,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::MeanLatency,
        Metric::P50Latency,
        Metric::P95Latency,
        Metric::P99Latency,
        Metric::MaxLatency,
        Metric::Throughput,
        Metric::MeanPower,
        Metric::Energy,
        Metric::Efficiency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MeanLatency => "mean_latency",
            Metric::P50Latency => "p50_latency",
            Metric::P95Latency => "p95_latency",
            Metric::P99Latency => "p99_latency",
            Metric::MaxLatency => "max_latency",
            Metric::Throughput => "throughput",
            Metric::MeanPower => "mean_power",
            Metric::Energy => "energy",
            Metric::Efficiency => "efficiency",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::MeanLatency
            | Metric::P50Latency
            | Metric::P95Latency
            | Metric::P99Latency
            | Metric::MaxLatency => "ms",
            Metric::Throughput => "msgs/s",
            Metric::MeanPower => "W",
            Metric::Energy => "J",
            Metric::Efficiency => "msgs/J",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Throughput | Metric::Efficiency)
    }

    pub fn value(self, s: &MetricsSummary) -> Option<f64> {
        match self {
            Metric::MeanLatency => s.mean_latency_ms,
            Metric::P50Latency => s.p50_ms,
            Metric::P95Latency => s.p95_ms,
            Metric::P99Latency => s.p99_ms,
            Metric::MaxLatency => s.max_latency_ms,
            Metric::Throughput => Some(s.throughput_msgs_per_s),
            Metric::MeanPower => s.mean_power_w,
            Metric::Energy => s.energy_j,
            Metric::Efficiency => s.msgs_per_joule,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let alias = match s {
            "latency" | "mean" => Some(Metric::MeanLatency),
            "p50" => Some(Metric::P50Latency),
            "p95" => Some(Metric::P95Latency),
            "p99" => Some(Metric::P99Latency),
            "max" => Some(Metric::MaxLatency),
            "power" => Some(Metric::MeanPower),
            _ => None,
        };
        alias
            .or_else(|| Metric::ALL.into_iter().find(|m| m.name() == s))
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_owned()))
    }
}

/// How many times better `candidate` is than `baseline` on `metric`.
///
/// Latency, power and energy compare baseline/candidate; throughput and
/// efficiency compare candidate/baseline.
pub fn speedup(
    baseline: &MetricsSummary,
    candidate: &MetricsSummary,
    metric: Metric,
) -> Result<f64, MetricsError> {
    let b = metric.value(baseline).ok_or(MetricsError::MetricAbsent(metric))?;
    let c = metric.value(candidate).ok_or(MetricsError::MetricAbsent(metric))?;
    speedup_values(b, c, metric)
}

/// [`speedup`] on raw values.
pub fn speedup_values(baseline: f64, candidate: f64, metric: Metric) -> Result<f64, MetricsError> {
    let (num, den) = if metric.higher_is_better() {
        (candidate, baseline)
    } else {
        (baseline, candidate)
    };
    if den == 0.0 {
        return Err(MetricsError::DivisionByZero(metric));
    }
    Ok(num / den)
}

/// Round to `digits` significant figures and format without trailing noise.
pub fn format_significant(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    let rounded = (x * scale).round() / scale;
    format!("{rounded:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn black(latencies_ms: &[u64]) -> Vec<LatencySample> {
        latencies_ms
            .iter()
            .enumerate()
            .map(|(i, &ms)| LatencySample {
                message_id: i as u64,
                latency_ns: ms * 1_000_000,
                methodology: Methodology::BlackBox,
            })
            .collect()
    }

    fn with_mean(ms: f64) -> MetricsSummary {
        let mut s = summarize(&[], 0, 1, 0).unwrap();
        s.mean_latency_ms = Some(ms);
        s
    }

    #[test]
    fn small_set() {
        let s = summarize(&black(&[5, 9, 3]), 0, 1_000_000_000, 3).unwrap();
        assert_eq!(s.max_latency_ms, Some(9.0));
        assert_eq!(s.p50_ms, Some(5.0));
        assert_eq!(s.sample_count, 3);
        assert!((s.mean_latency_ms.unwrap() - 17.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn throughput_is_delivered_over_duration() {
        let s = summarize(&[], 0, 5_000_000_000, 500).unwrap();
        assert_eq!(s.throughput_msgs_per_s, 100.0);
    }

    #[test]
    fn empty_run_has_no_latency_fields() {
        let s = summarize(&[], 0, 0, 0).unwrap();
        assert_eq!(s.sample_count, 0);
        assert!(s.mean_latency_ms.is_none() && s.max_latency_ms.is_none());
        assert!(s.valid);
        let yaml = serde_yaml::to_string(&s).unwrap();
        assert!(!yaml.contains("p50_ms"));
    }

    #[test]
    fn zero_duration_with_deliveries_is_rejected() {
        assert_eq!(summarize(&[], 0, 0, 3), Err(MetricsError::ZeroDuration));
    }

    #[test]
    fn loss_rate() {
        let s = summarize(&black(&[1, 1, 1, 1, 1]), 5, 1, 5).unwrap();
        assert_eq!(s.loss_rate, 0.5);
    }

    #[test]
    fn nearest_rank_edges() {
        assert_eq!(nearest_rank(&[10, 20, 30], 1), Some(10));
        assert_eq!(nearest_rank(&[10, 20, 30], 100), Some(30));
        assert_eq!(nearest_rank(&[10, 20, 30], 34), Some(20));
        assert_eq!(nearest_rank(&[10, 20, 30], 33), Some(10));
        assert_eq!(nearest_rank(&[], 50), None);
        assert_eq!(nearest_rank(&[1], 0), None);
    }

    #[test]
    fn efficiency_division() {
        let mut s = summarize(&[], 0, 1_000_000_000, 100).unwrap();
        assert_eq!(efficiency(&s), Err(MetricsError::AbsentPower));
        s.mean_power_w = Some(10.0);
        assert_eq!(efficiency(&s), Ok(10.0));
        let mut idle = summarize(&[], 0, 1_000_000_000, 0).unwrap();
        idle.mean_power_w = Some(10.0);
        assert_eq!(efficiency(&idle), Ok(0.0));
    }

    #[test]
    fn speedup_latency_and_throughput() {
        let r = speedup(&with_mean(173.0), &with_mean(15.0), Metric::MeanLatency).unwrap();
        assert_eq!(format_significant(r, 3), "11.5");
        let r = speedup(&with_mean(6.5), &with_mean(1.0), Metric::MeanLatency).unwrap();
        assert_eq!(r, 6.5);
        let s = with_mean(3.0);
        assert_eq!(speedup(&s, &s, Metric::MeanLatency), Ok(1.0));

        let mut a = with_mean(1.0);
        let mut b = with_mean(1.0);
        a.throughput_msgs_per_s = 50.0;
        b.throughput_msgs_per_s = 100.0;
        assert_eq!(speedup(&a, &b, Metric::Throughput), Ok(2.0));
    }

    #[test]
    fn speedup_errors() {
        let a = with_mean(1.0);
        assert_eq!(
            speedup(&a, &a, Metric::MeanPower),
            Err(MetricsError::MetricAbsent(Metric::MeanPower))
        );
        assert_eq!(
            speedup(&a, &with_mean(0.0), Metric::MeanLatency),
            Err(MetricsError::DivisionByZero(Metric::MeanLatency))
        );
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("bogus".parse::<Metric>().is_err());
    }

    #[test]
    fn significant_figures() {
        assert_eq!(format_significant(11.533333, 3), "11.5");
        assert_eq!(format_significant(1.0, 3), "1.00");
        assert_eq!(format_significant(123.456, 3), "123");
        assert_eq!(format_significant(0.012345, 3), "0.0123");
    }
}
