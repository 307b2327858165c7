//! `rxits`: simulate → ingest → classify → aggregate → stats / its → report.
//!
//! Exit status 0 on success, 1 on a usage error, 2 on a data or contract
//! error. Every subcommand writes a run manifest next to its outputs.

mod args_file;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rxits::intervention::EventKind;
use rxits::{DrugFamily, MonthKey};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "rxits", version, about = "Geospatial classification and interrupted time-series analysis of prescription records")]
pub struct Cli {
    /// Worker threads for per-series and per-model parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// JSON object whose keys mirror the subcommand's long flags
    /// (underscores or dashes). Flags on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub args_file: Option<PathBuf>,

    /// Write the run manifest here instead of next to the outputs.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate synthetic prescription records from a scenario.
    Simulate(SimulateArgs),
    /// Parse a transaction CSV and apply the exclusion filters.
    Ingest(IngestArgs),
    /// Assign distance/disparity class codes and risk levels.
    Classify(ClassifyArgs),
    /// Monthly mean MME/day series, overall and per class.
    Aggregate(AggregateArgs),
    /// Class summary and pre/post tables (Markdown and CSV).
    SummaryTable(SummaryTableArgs),
    /// One-way ANOVA of MME/day across classes.
    Anova(AnovaArgs),
    /// One-sided t tests of class MME/day against a threshold.
    Ttest(TtestArgs),
    /// Fit an ARIMA model to one series, optionally forecasting.
    Fit(FitArgs),
    /// Interrupted time-series analysis of every aggregated series.
    Its(ItsArgs),
    /// Assemble the tables and plot data into one Markdown report.
    Report(ReportArgs),
}

impl Command {
    pub const NAMES: [&'static str; 10] =
        ["simulate", "ingest", "classify", "aggregate", "summary-table", "anova", "ttest", "fit", "its", "report"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Ingest(_) => "ingest",
            Command::Classify(_) => "classify",
            Command::Aggregate(_) => "aggregate",
            Command::SummaryTable(_) => "summary-table",
            Command::Anova(_) => "anova",
            Command::Ttest(_) => "ttest",
            Command::Fit(_) => "fit",
            Command::Its(_) => "its",
            Command::Report(_) => "report",
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("invalid date '{s}', expected YYYY-MM-DD"))
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// Scenario JSON; fields left out take their defaults. Omit for the
    /// built-in scenario.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Approximate number of records.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Random seed; defaults to the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write the effective scenario JSON here.
    #[arg(long, value_name = "PATH")]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct IngestArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Cleaned records in the input schema.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Filter report JSON [default: <out>.filter_report.json].
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Records with more total MME than this are excluded.
    #[arg(long, default_value_t = 1e5)]
    pub cap: f64,
    /// Records filled before this date are excluded.
    #[arg(long, default_value = "2014-01-01", value_parser = parse_date)]
    pub cutoff: NaiveDate,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Two stakeholders within this many miles are together.
    #[arg(long, default_value_t = 50.0)]
    pub near: f64,
    /// An isolated stakeholder is at least this many times farther away.
    #[arg(long, default_value_t = 3.0)]
    pub ratio: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct AggregateArgs {
    /// Classified records CSV.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "2018-05")]
    pub policy_month: MonthKey,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SummaryTableArgs {
    /// Classified records CSV.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "2018-05")]
    pub policy_month: MonthKey,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct AnovaArgs {
    /// Classified records CSV.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "opioid")]
    pub family: DrugFamily,
    /// Result JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TtestUnit {
    /// Monthly mean MME/day of each class.
    Month,
    /// Record-level MME/day.
    Record,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TtestArgs {
    /// Classified records CSV.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "opioid")]
    pub family: DrugFamily,
    /// Threshold under the null hypothesis (alternative: mean above it).
    #[arg(long, default_value_t = 50.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = TtestUnit::Month)]
    pub unit: TtestUnit,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Result JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FitArgs {
    /// Series CSV written by `aggregate`.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// "p,d,q" or "p,d,q,P,D,Q"; automatic selection when omitted.
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long, default_value_t = 12)]
    pub season: usize,
    /// Force the constant in or out (default: in when undifferenced).
    #[arg(long)]
    pub constant: Option<bool>,
    /// Months to forecast past the end of the series.
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Result JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ItsArgs {
    /// Directory written by `aggregate`.
    #[arg(long, value_name = "DIR")]
    pub series_dir: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "2018-05")]
    pub policy_month: MonthKey,
    /// Second onset for the same event inputs (law announcement).
    #[arg(long)]
    pub announcement_month: Option<MonthKey>,
    #[arg(long, value_delimiter = ',', default_value = "level_shift,ramp,inverse_trend")]
    pub events: Vec<EventKind>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Prediction-interval level for the post-policy forecast.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 12)]
    pub season: usize,
    #[arg(long, default_value_t = 36)]
    pub min_pre_months: usize,
    #[arg(long, default_value_t = 12)]
    pub min_post_months: usize,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// Directory holding `tables/` (from summary-table) and `its/` (from its).
    #[arg(long, value_name = "DIR")]
    pub results_dir: PathBuf,
    /// Summary-table output [default: <results-dir>/tables].
    #[arg(long, value_name = "DIR")]
    pub tables_dir: Option<PathBuf>,
    /// its output [default: <results-dir>/its].
    #[arg(long, value_name = "DIR")]
    pub its_dir: Option<PathBuf>,
    /// [default: <results-dir>/report.md]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// How a run failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<rxits::Error> for Failure {
    fn from(e: rxits::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match args_file::expand(argv, &Command::NAMES) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
