//! Power providers and energy integration.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Deserialize;

use super::MetricsError;
use crate::clock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    pub stamp_ns: u64,
    pub watts: f64,
}

/// Result of integrating power over a run window. Absent fields come with a
/// reason.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerIntegration {
    pub mean_power_w: Option<f64>,
    pub energy_j: Option<f64>,
    pub reason: Option<String>,
}

impl PowerIntegration {
    pub fn absent(reason: impl Into<String>) -> Self {
        PowerIntegration {
            mean_power_w: None,
            energy_j: None,
            reason: Some(reason.into()),
        }
    }
}

fn interpolate(a: PowerSample, b: PowerSample, t: u64) -> f64 {
    if t <= a.stamp_ns {
        return a.watts;
    }
    if t >= b.stamp_ns {
        return b.watts;
    }
    let frac = (t - a.stamp_ns) as f64 / (b.stamp_ns - a.stamp_ns) as f64;
    a.watts + (b.watts - a.watts) * frac
}

/// Trapezoidal energy over `[run_start, run_end]` clipped to the sampled span,
/// with linear interpolation at the clip points.
pub fn integrate_power(samples: &[PowerSample], run_start: u64, run_end: u64) -> PowerIntegration {
    if samples.len() < 2 {
        return PowerIntegration::absent("fewer than two power samples");
    }
    if samples.windows(2).any(|w| w[1].stamp_ns <= w[0].stamp_ns) {
        return PowerIntegration::absent("power sample stamps not strictly increasing");
    }
    let lo = run_start.max(samples[0].stamp_ns);
    let hi = run_end.min(samples[samples.len() - 1].stamp_ns);
    if hi <= lo {
        return PowerIntegration::absent("power samples do not overlap the run");
    }

    let mut energy = 0.0;
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let from = a.stamp_ns.max(lo);
        let to = b.stamp_ns.min(hi);
        if to <= from {
            continue;
        }
        let (pa, pb) = (interpolate(a, b, from), interpolate(a, b, to));
        energy += 0.5 * (pa + pb) * ((to - from) as f64 / 1e9);
    }
    let duration_s = (hi - lo) as f64 / 1e9;
    let reason = (lo > run_start || hi < run_end)
        .then(|| "power samples cover only part of the run".to_owned());
    PowerIntegration {
        mean_power_w: Some(energy / duration_s),
        energy_j: Some(energy),
        reason,
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    stamp_ns: u64,
    watts: f64,
}

/// Parse the `stamp_ns,watts` CSV power format.
pub fn parse_power_csv(text: &str) -> Result<Vec<PowerSample>, MetricsError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MetricsError::BadPowerData(e.to_string()))?;
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["stamp_ns", "watts"] {
        return Err(MetricsError::BadPowerData(
            "expected header `stamp_ns,watts`".into(),
        ));
    }
    let mut samples: Vec<PowerSample> = Vec::new();
    for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| MetricsError::BadPowerData(e.to_string()))?;
        if row.watts < 0.0 || !row.watts.is_finite() {
            return Err(MetricsError::BadPowerData(format!(
                "row {}: watts must be finite and non-negative",
                line + 2
            )));
        }
        if samples.last().is_some_and(|p| p.stamp_ns >= row.stamp_ns) {
            return Err(MetricsError::BadPowerData(format!(
                "row {}: stamps must be strictly increasing",
                line + 2
            )));
        }
        samples.push(PowerSample {
            stamp_ns: row.stamp_ns,
            watts: row.watts,
        });
    }
    Ok(samples)
}

pub fn load_power_csv(path: &Path) -> Result<Vec<PowerSample>, MetricsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MetricsError::BadPowerData(format!("{}: {e}", path.display())))?;
    parse_power_csv(&text)
}

/// Where power readings for a run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerProvider {
    None,
    Constant { watts: f64 },
    /// Samples with stamps relative to the run start, replayed onto the run.
    File { samples: Vec<PowerSample> },
    /// Platform energy counter (Linux RAPL), when readable.
    System { sample_period_ns: u64 },
}

impl PowerProvider {
    pub const DEFAULT_SAMPLE_PERIOD_NS: u64 = 10_000_000;

    pub fn constant(watts: f64) -> Result<Self, MetricsError> {
        if watts < 0.0 || !watts.is_finite() {
            return Err(MetricsError::BadPowerData(format!("constant watts {watts}")));
        }
        Ok(PowerProvider::Constant { watts })
    }

    pub fn file(path: &Path) -> Result<Self, MetricsError> {
        Ok(PowerProvider::File {
            samples: load_power_csv(path)?,
        })
    }

    pub fn system() -> Self {
        PowerProvider::System {
            sample_period_ns: Self::DEFAULT_SAMPLE_PERIOD_NS,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PowerProvider::None)
    }
}

const RAPL_ENERGY: &str = "/sys/class/powercap/intel-rapl:0/energy_uj";
const RAPL_RANGE: &str = "/sys/class/powercap/intel-rapl:0/max_energy_range_uj";

fn read_u64(path: &Path) -> Option<u64> {
    std::fs::read_to_string(path).ok()?.trim().parse().ok()
}

/// Collects power samples for one run.
pub struct PowerSampler {
    provider: PowerProvider,
    run_start: u64,
    system: Option<(Arc<AtomicBool>, JoinHandle<Vec<PowerSample>>)>,
    unavailable: Option<String>,
}

impl PowerSampler {
    /// Begin sampling; `run_start` anchors replayed and synthesized samples.
    pub fn start(provider: &PowerProvider, run_start: u64) -> Self {
        let mut sampler = PowerSampler {
            provider: provider.clone(),
            run_start,
            system: None,
            unavailable: None,
        };
        if let PowerProvider::System { sample_period_ns } = *provider {
            let path = PathBuf::from(RAPL_ENERGY);
            if read_u64(&path).is_none() {
                sampler.unavailable = Some("system power counter unavailable".into());
            } else {
                let stop = Arc::new(AtomicBool::new(false));
                let flag = Arc::clone(&stop);
                let handle = std::thread::Builder::new()
                    .name("power-sampler".into())
                    .spawn(move || rapl_loop(&path, sample_period_ns, &flag))
                    .expect("spawn power sampler");
                sampler.system = Some((stop, handle));
            }
        }
        sampler
    }

    /// Stop sampling and integrate over `[run_start, run_end]`.
    pub fn finish(self, run_end: u64) -> PowerIntegration {
        let run_start = self.run_start;
        match self.provider {
            PowerProvider::None => PowerIntegration::default(),
            PowerProvider::Constant { watts } => {
                let samples = [
                    PowerSample {
                        stamp_ns: run_start,
                        watts,
                    },
                    PowerSample {
                        stamp_ns: run_end.max(run_start + 1),
                        watts,
                    },
                ];
                integrate_power(&samples, run_start, run_end)
            }
            PowerProvider::File { samples } => {
                let shifted: Vec<PowerSample> = samples
                    .iter()
                    .map(|s| PowerSample {
                        stamp_ns: s.stamp_ns + run_start,
                        watts: s.watts,
                    })
                    .collect();
                integrate_power(&shifted, run_start, run_end)
            }
            PowerProvider::System { .. } => match (self.system, self.unavailable) {
                (Some((stop, handle)), _) => {
                    stop.store(true, Ordering::Relaxed);
                    match handle.join() {
                        Ok(samples) => integrate_power(&samples, run_start, run_end),
                        Err(_) => PowerIntegration::absent("power sampler failed"),
                    }
                }
                (None, reason) => PowerIntegration::absent(
                    reason.unwrap_or_else(|| "system power counter unavailable".into()),
                ),
            },
        }
    }
}

fn rapl_loop(path: &Path, period_ns: u64, stop: &AtomicBool) -> Vec<PowerSample> {
    let range = read_u64(Path::new(RAPL_RANGE)).unwrap_or(u64::MAX);
    let mut samples = Vec::new();
    let mut prev: Option<(u64, u64)> = None;
    while !stop.load(Ordering::Relaxed) {
        if let Some(uj) = read_u64(path) {
            let now = clock::now_ns();
            if let Some((t0, e0)) = prev {
                let delta_uj = if uj >= e0 { uj - e0 } else { range - e0 + uj };
                if now > t0 {
                    samples.push(PowerSample {
                        stamp_ns: now,
                        watts: delta_uj as f64 * 1e-6 / ((now - t0) as f64 / 1e9),
                    });
                }
            }
            prev = Some((now, uj));
        }
        std::thread::sleep(Duration::from_nanos(period_ns));
    }
    samples
}
