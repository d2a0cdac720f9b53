//! Command-line front end of the `bellforge` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    self, format_shape, parse_shape, ExperimentSummary, FamilyFrequency, RunOptions, Scenario,
    SearchOptions, StateSpec, StrengthHistogram, DEFAULT_BIN_WIDTH,
};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_TRIALS: u64 = 10_000;
const DEFAULT_HORODECKI_TRIALS: u64 = 100_000;
const DEFAULT_FACET_VIOLATIONS: u64 = 300;
const DEFAULT_GENUINE_VIOLATIONS: u64 = 500;

#[derive(Debug, Parser)]
#[command(
    name = "bellforge",
    version,
    about = "Nonlocality strength of multiqubit states under random measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strength histogram of a fixed state under random settings.
    StrengthDist(Flags),
    /// Violation probability and mean strength over random states and settings.
    Typicality(Flags),
    /// Which inequality family is strongest on violating draws.
    FacetRelevance(Flags),
    /// Share of violations that need more than two settings per party.
    GenuineSettings(Flags),
    /// Mean closed-form CHSH strength of random two-qubit states.
    HorodeckiAverage(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// ghz:alpha=45 | w | dicke:k=2 | lcluster | rcluster | product | random
    #[arg(long)]
    state: Option<String>,
    /// Settings per party, e.g. 5x5 or 2x2x2x2.
    #[arg(long)]
    shape: Option<String>,
    /// Trials to run; the trial cap for facet-relevance and genuine-settings.
    #[arg(long)]
    trials: Option<u64>,
    /// Violating trials to collect (facet-relevance, genuine-settings).
    #[arg(long)]
    min_violations: Option<u64>,
    #[arg(long, env = "BELLFORGE_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; all available cores by default.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StrengthDist,
    Typicality,
    FacetRelevance,
    GenuineSettings,
    HorodeckiAverage,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::StrengthDist => "strength-dist",
            Experiment::Typicality => "typicality",
            Experiment::FacetRelevance => "facet-relevance",
            Experiment::GenuineSettings => "genuine-settings",
            Experiment::HorodeckiAverage => "horodecki-average",
        }
    }

    fn searches(self) -> bool {
        matches!(
            self,
            Experiment::FacetRelevance | Experiment::GenuineSettings
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub state: StateSpec,
    pub shape: Vec<usize>,
    /// Trials, or the trial cap for the violation searches.
    pub trials: u64,
    pub min_violations: Option<u64>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub bin_width: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn n_parties(&self) -> usize {
        self.shape.len()
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            bin_width: self.bin_width,
        }
    }
}

/// Parses a full argument vector, program name first. Help and version
/// requests come back as [`Error::Help`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            Error::Help(e.to_string())
        }
        _ => Error::Usage(e.render().to_string()),
    })?;
    let (experiment, flags) = match cli.command {
        Command::StrengthDist(f) => (Experiment::StrengthDist, f),
        Command::Typicality(f) => (Experiment::Typicality, f),
        Command::FacetRelevance(f) => (Experiment::FacetRelevance, f),
        Command::GenuineSettings(f) => (Experiment::GenuineSettings, f),
        Command::HorodeckiAverage(f) => (Experiment::HorodeckiAverage, f),
    };
    let usage = |msg: String| Error::Usage(msg);
    let state = match (&flags.state, experiment) {
        (Some(s), _) => s.parse::<StateSpec>().map_err(|e| usage(e.to_string()))?,
        (None, Experiment::Typicality | Experiment::HorodeckiAverage) => StateSpec::Random,
        (None, _) => return Err(usage(format!("{} needs --state", experiment.name()))),
    };
    if matches!(
        experiment,
        Experiment::Typicality | Experiment::HorodeckiAverage
    ) && state != StateSpec::Random
    {
        return Err(usage(format!(
            "{} always uses random states",
            experiment.name()
        )));
    }
    let shape = match (&flags.shape, experiment) {
        (Some(s), _) => parse_shape(s).map_err(|e| usage(e.to_string()))?,
        (None, Experiment::HorodeckiAverage) => vec![2, 2],
        (None, _) => return Err(usage(format!("{} needs --shape", experiment.name()))),
    };
    if experiment == Experiment::HorodeckiAverage && shape.len() != 2 {
        return Err(usage("horodecki-average is defined for two qubits".into()));
    }
    Scenario::new(state, &shape).map_err(|e| usage(e.to_string()))?;
    if !(flags.bin_width > 0.0 && flags.bin_width <= 1.0) {
        return Err(usage(format!(
            "--bin-width {} outside (0, 1]",
            flags.bin_width
        )));
    }
    if flags.workers == Some(0) {
        return Err(usage("--workers must be positive".into()));
    }
    let min_violations = match (flags.min_violations, experiment) {
        (Some(_), e) if !e.searches() => {
            return Err(usage(format!(
                "{} does not take --min-violations",
                e.name()
            )))
        }
        (Some(0), _) => return Err(usage("--min-violations must be positive".into())),
        (m, Experiment::FacetRelevance) => Some(m.unwrap_or(DEFAULT_FACET_VIOLATIONS)),
        (m, Experiment::GenuineSettings) => Some(m.unwrap_or(DEFAULT_GENUINE_VIOLATIONS)),
        _ => None,
    };
    let trials = match (flags.trials, min_violations) {
        (Some(0), _) => return Err(usage("--trials must be positive".into())),
        (Some(t), _) => t,
        (None, Some(m)) => experiment::DEFAULT_CAP_FACTOR.saturating_mul(m),
        (None, None) if experiment == Experiment::HorodeckiAverage => DEFAULT_HORODECKI_TRIALS,
        (None, None) => DEFAULT_TRIALS,
    };
    Ok(RunConfig {
        experiment,
        state,
        shape,
        trials,
        min_violations,
        seed: flags.seed,
        workers: flags.workers,
        bin_width: flags.bin_width,
        out: flags.out,
        format: flags.format,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub state: String,
    pub shape: String,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_violations: Option<u64>,
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramJson {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    /// Family name, or `none` for violations no family detects.
    pub family: String,
    pub count: u64,
    pub frequency: f64,
    pub stderr: f64,
}

impl From<&FamilyFrequency> for FamilyJson {
    fn from(f: &FamilyFrequency) -> Self {
        Self {
            family: f
                .family
                .map_or_else(|| "none".to_string(), |id| id.to_string()),
            count: f.count,
            frequency: f.frequency,
            stderr: f.stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenuineJson {
    pub violating: u64,
    /// Violations with no violated two-setting restriction.
    pub genuine: u64,
    pub fraction: f64,
    pub stderr: f64,
    /// Violations stronger than every two-setting restriction.
    pub exceeding: u64,
    pub exceeding_fraction: f64,
    pub exceeding_stderr: f64,
    pub zero_violations: bool,
}

/// Everything one run writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub params: Params,
    pub seed: u64,
    pub histogram: HistogramJson,
    pub pv: f64,
    pub pv_stderr: f64,
    pub mean_strength: f64,
    pub mean_strength_stderr: f64,
    pub max_strength: f64,
    pub trials: u64,
    pub violating_trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<FamilyJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_families: Option<Vec<FamilyJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genuine: Option<GenuineJson>,
    /// Set when the run stopped short, e.g. at the trial cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Report {
    fn new(config: &RunConfig, histogram: &StrengthHistogram, summary: &ExperimentSummary) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: config.experiment.name().to_string(),
            params: Params {
                state: config.state.to_string(),
                shape: format_shape(&config.shape),
                trials: config.trials,
                min_violations: config.min_violations,
                bin_width: config.bin_width,
            },
            seed: config.seed,
            histogram: HistogramJson {
                bin_width: histogram.bin_width(),
                counts: histogram.counts().to_vec(),
            },
            pv: summary.pv,
            pv_stderr: summary.pv_stderr,
            mean_strength: summary.mean_strength,
            mean_strength_stderr: summary.mean_strength_stderr,
            max_strength: summary.max_strength,
            trials: summary.trials,
            violating_trials: summary.violating_trials,
            families: None,
            certificate_families: None,
            genuine: None,
            warning: None,
        }
    }

    pub fn histogram(&self) -> Result<StrengthHistogram> {
        StrengthHistogram::from_parts(
            self.histogram.bin_width,
            self.histogram.counts.clone(),
            self.trials,
        )
    }
}

fn cap_warning(trials: u64, found: u64, wanted: u64) -> String {
    format!("trial cap of {trials} reached with {found} of {wanted} violations")
}

/// Runs the configured experiment.
pub fn run(config: &RunConfig) -> Result<Report> {
    let opts = config.run_options();
    let report = match config.experiment {
        Experiment::StrengthDist | Experiment::Typicality => {
            let (h, s) = experiment::run_strength_distribution_with(
                config.state,
                &config.shape,
                config.trials,
                config.seed,
                &opts,
            )?;
            Report::new(config, &h, &s)
        }
        Experiment::HorodeckiAverage => {
            let (h, s) = experiment::run_horodecki_average(config.trials, config.seed, &opts)?;
            Report::new(config, &h, &s)
        }
        Experiment::FacetRelevance => {
            let wanted = config.min_violations.unwrap_or(DEFAULT_FACET_VIOLATIONS);
            let search = SearchOptions {
                min_violations: wanted,
                trial_cap: Some(config.trials),
            };
            let rel = experiment::run_facet_relevance_with(
                config.state,
                &config.shape,
                config.seed,
                &search,
                &opts,
            )?;
            let acc = &rel.accumulator;
            let mut report = Report::new(config, acc.histogram(), &acc.summary(config.seed));
            report.families = Some(rel.frequencies().iter().map(FamilyJson::from).collect());
            report.certificate_families = Some(
                rel.certificate_frequencies()
                    .iter()
                    .map(FamilyJson::from)
                    .collect(),
            );
            if rel.partial {
                report.warning = Some(cap_warning(config.trials, rel.violations(), wanted));
            }
            report
        }
        Experiment::GenuineSettings => {
            let wanted = config.min_violations.unwrap_or(DEFAULT_GENUINE_VIOLATIONS);
            let search = SearchOptions {
                min_violations: wanted,
                trial_cap: Some(config.trials),
            };
            let g = experiment::run_genuine_settings(
                config.state,
                &config.shape,
                config.seed,
                &search,
                &opts,
            )?;
            let acc = &g.accumulator;
            let mut report = Report::new(config, acc.histogram(), &acc.summary(config.seed));
            report.genuine = Some(GenuineJson {
                violating: g.fraction.violating,
                genuine: g.fraction.genuine,
                fraction: g.fraction.fraction,
                stderr: g.fraction.stderr(),
                exceeding: g.fraction.exceeding,
                exceeding_fraction: g.fraction.exceeding_fraction,
                exceeding_stderr: g.fraction.exceeding_stderr(),
                zero_violations: g.fraction.zero_violations,
            });
            if g.partial {
                report.warning = Some(cap_warning(config.trials, g.fraction.violating, wanted));
            }
            report
        }
    };
    Ok(report)
}

pub fn render_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// `bin_upper,pdf` rows; only the header when no trial ran.
pub fn render_csv(histogram: &StrengthHistogram) -> String {
    let mut s = String::from("bin_upper,pdf\n");
    if histogram.total_trials() == 0 {
        return s;
    }
    for (k, p) in histogram.pdf().iter().enumerate() {
        s.push_str(&format!("{:.2},{:.6}\n", histogram.bin_upper(k), p));
    }
    s
}

/// Writes the report to `config.out`, or standard output.
pub fn write_output(report: &Report, config: &RunConfig) -> Result<()> {
    let text = match config.format {
        Format::Json => render_json(report)?,
        Format::Csv => render_csv(&report.histogram()?),
    };
    match &config.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(Error::Help(text)) => {
            print!("{text}");
            return 0;
        }
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    match run(&config).and_then(|report| {
        if let Some(w) = &report.warning {
            eprintln!("warning: {w}");
        }
        write_output(&report, &config)
    }) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
