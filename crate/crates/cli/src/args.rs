use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphperf::descriptor::Category;
use graphperf::metrics::{Metric, PowerProvider};
use graphperf::runner::MethodologySelection;

#[derive(Debug, Parser)]
#[command(name = "graphperf", version, about = "Benchmark publish/subscribe computational graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run benchmarks and write one results file per run and methodology.
    Run(RunArgs),
    /// Compare two sets of results run by run headline.
    Compare(CompareArgs),
    /// Cross-run reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// List the benchmark descriptors under a directory.
    List { dir: PathBuf },
    /// Offline trace tools.
    #[command(subcommand)]
    Trace(TraceCommand),
    /// Write the reference suite (descriptors and input logs) to a directory.
    Suite {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodologyArg {
    Grey,
    Black,
    Both,
}

impl From<MethodologyArg> for MethodologySelection {
    fn from(m: MethodologyArg) -> Self {
        match m {
            MethodologyArg::Grey => MethodologySelection::Grey,
            MethodologyArg::Black => MethodologySelection::Black,
            MethodologyArg::Both => MethodologySelection::Both,
        }
    }
}

/// `--power` selection before any file is read.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerArg {
    None,
    Constant(f64),
    File(PathBuf),
    System,
}

impl FromStr for PowerArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "none" => Ok(PowerArg::None),
            None if s == "system" => Ok(PowerArg::System),
            Some(("constant", w)) => {
                let watts: f64 = w.parse().map_err(|_| format!("bad wattage {w:?}"))?;
                PowerProvider::constant(watts).map_err(|e| e.to_string())?;
                Ok(PowerArg::Constant(watts))
            }
            Some(("file", p)) if !p.is_empty() => Ok(PowerArg::File(p.into())),
            _ => Err(format!("expected none, constant:W, file:PATH or system, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Descriptor files, package directories, suite directories or reference ids.
    #[arg(required = true)]
    pub targets: Vec<String>,
    #[arg(long, value_enum, default_value = "black")]
    pub methodology: MethodologyArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub reps: u32,
    #[arg(long, default_value = "none")]
    pub power: PowerArg,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Variant label recorded in every results file.
    #[arg(long, default_value = "default")]
    pub label: String,
    /// Run without tracepoints (black-box only).
    #[arg(long)]
    pub no_tracer: bool,
    /// Events per thread ring.
    #[arg(long)]
    pub trace_capacity: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline results (files or directories).
    #[arg(long = "a", required = true, num_args = 1..)]
    pub a: Vec<PathBuf>,
    /// Candidate results (files or directories).
    #[arg(long = "b", required = true, num_args = 1..)]
    pub b: Vec<PathBuf>,
    #[arg(long, default_value = "a")]
    pub label_a: String,
    #[arg(long, default_value = "b")]
    pub label_b: String,
    #[arg(long, default_value = "mean_latency")]
    pub metric: Metric,
    /// Directory for comparison.csv (and comparison.svg with --svg).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Radar plot of one metric over the benchmarks of a category.
    Radar {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        category: Category,
        #[arg(long, default_value = "mean_latency")]
        metric: Metric,
        /// SVG output path; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-run headline table.
    Table {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// Grey-box latencies from a trace file.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        source_topic: String,
        #[arg(long)]
        sink_node: String,
        #[arg(long, default_value_t = graphperf::harness::DEFAULT_WARMUP_DISCARD)]
        warmup: u64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_forms() {
        assert_eq!("none".parse(), Ok(PowerArg::None));
        assert_eq!("system".parse(), Ok(PowerArg::System));
        assert_eq!("constant:10".parse(), Ok(PowerArg::Constant(10.0)));
        assert_eq!("file:p.csv".parse(), Ok(PowerArg::File("p.csv".into())));
        for bad in ["constant:-1", "constant:x", "file:", "solar", "constant"] {
            assert!(bad.parse::<PowerArg>().is_err(), "{bad}");
        }
    }

    #[test]
    fn reps_must_be_positive() {
        assert!(Cli::try_parse_from(["graphperf", "run", "x", "--reps", "0"]).is_err());
        let cli = Cli::try_parse_from(["graphperf", "run", "x", "--reps", "3", "--methodology", "both"]).unwrap();
        match cli.command {
            Command::Run(r) => {
                assert_eq!(r.reps, 3);
                assert_eq!(r.methodology, MethodologyArg::Both);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
