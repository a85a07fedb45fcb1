//! Command-line front end for graphperf: run benchmarks, aggregate across
//! runs, compare variants and draw reports.

pub mod args;
pub mod commands;
pub mod compare;
pub mod error;
pub mod radar;
pub mod results;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, ReportCommand, TraceCommand};
pub use error::{CliError, CliResult};

/// Parse `args` (program name first) and run the command. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let rendered = e.render().to_string();
            if informational {
                let _ = write!(out, "{rendered}");
                return 0;
            }
            let _ = write!(err, "{rendered}");
            return 2;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "graphperf: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Run(a) => commands::cmd_run(&a, out, err),
        Command::Compare(a) => commands::cmd_compare(&a, out),
        Command::Report(ReportCommand::Radar {
            results,
            category,
            metric,
            out: svg,
        }) => commands::cmd_report_radar(&results, category, metric, svg.as_deref(), out),
        Command::Report(ReportCommand::Table { results, csv }) => {
            commands::cmd_report_table(&results, csv.as_deref(), out)
        }
        Command::List { dir } => commands::cmd_list(&dir, out),
        Command::Trace(TraceCommand::Analyze {
            trace,
            source_topic,
            sink_node,
            warmup,
        }) => commands::cmd_trace_analyze(&trace, &source_topic, &sink_node, warmup, out, err),
        Command::Suite { dir } => commands::cmd_suite(&dir, out),
    }
}
