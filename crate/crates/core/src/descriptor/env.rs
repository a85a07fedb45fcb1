use std::fs;

use serde::{Deserialize, Serialize};

use crate::tracer::subject_hash;

pub const UNKNOWN: &str = "unknown";
pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Host and configuration facts recorded with every result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentRecord {
    /// FNV-1a of the hostname, so results can be grouped without naming hosts.
    pub hostname_hash: String,
    pub os_name: String,
    pub os_version: String,
    pub core_count: usize,
    pub cpu_model: String,
    /// Nominal maximum frequency, e.g. `3200 MHz`.
    pub clock_frequency: String,
    pub executor_workers: usize,
    pub tracer_enabled: bool,
    pub harness_version: String,
}

fn read_trimmed(path: &str) -> Option<String> {
    let s = fs::read_to_string(path).ok()?;
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_owned())
}

fn cpuinfo_field(cpuinfo: &str, key: &str) -> Option<String> {
    cpuinfo.lines().find_map(|line| {
        let (k, v) = line.split_once(':')?;
        (k.trim() == key).then(|| v.trim().to_owned()).filter(|v| !v.is_empty())
    })
}

fn frequency(cpuinfo: &str) -> Option<String> {
    if let Some(khz) = read_trimmed("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq")
        .and_then(|s| s.parse::<u64>().ok())
    {
        return Some(format!("{} MHz", khz / 1000));
    }
    // Current "cpu MHz" drifts with scaling; only the model string's rating is nominal.
    let model = cpuinfo_field(cpuinfo, "model name")?;
    let ghz: f64 = model.rsplit_once('@')?.1.trim().strip_suffix("GHz")?.trim().parse().ok()?;
    Some(format!("{} MHz", (ghz * 1000.0).round() as u64))
}

/// Best-effort description of this host. Anything unreadable is `"unknown"`.
pub fn capture_environment(executor_workers: usize, tracer_enabled: bool) -> EnvironmentRecord {
    let cpuinfo = fs::read_to_string("/proc/cpuinfo").unwrap_or_default();
    let hostname = read_trimmed("/proc/sys/kernel/hostname").or_else(|| read_trimmed("/etc/hostname"));
    let unknown = || UNKNOWN.to_owned();
    EnvironmentRecord {
        hostname_hash: hostname
            .map(|h| format!("{:016x}", subject_hash(&h)))
            .unwrap_or_else(unknown),
        os_name: std::env::consts::OS.to_owned(),
        os_version: read_trimmed("/proc/sys/kernel/osrelease").unwrap_or_else(unknown),
        core_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
        cpu_model: cpuinfo_field(&cpuinfo, "model name")
            .or_else(|| cpuinfo_field(&cpuinfo, "Model"))
            .unwrap_or_else(unknown),
        clock_frequency: frequency(&cpuinfo).unwrap_or_else(unknown),
        executor_workers,
        tracer_enabled,
        harness_version: HARNESS_VERSION.to_owned(),
    }
}
