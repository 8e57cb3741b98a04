//! Experiment front end: TOML experiment specifications, deterministic
//! scenario execution with a cappable worker pool, Monte Carlo summary
//! statistics, and plot-ready CSV emission.
//!
//! # Experiment files
//!
//! An experiment is a TOML document with a `scenario` tag, optional
//! top-level `seed`, `trials`, and `output_path` keys, and at most one
//! section named after the tag holding that scenario's configuration.
//! Defaults populate every omitted field, so the minimal valid experiment
//! is a single line such as `scenario = "mobile_relay"`. Overrides resolve
//! in precedence order: command line, then top-level keys, then the
//! scenario section, then built-in defaults. For the UE-sampling sweep
//! scenario the trial count maps onto UEs per grid point.
//!
//! # Determinism
//!
//! A given [`ExperimentSpec`] produces byte-identical CSV on every run:
//! scenario reductions are ordered by trial index, floating-point values
//! are formatted locale-independently, and the worker count (cappable via
//! the [`WORKER_ENV`] environment variable) never influences values.

use crate::scenarios::{
    DualBandSweepConfig, DualBandSweepResult, HybridCaseConfig, HybridVsDigitalResult,
    RelayCaseConfig, RelayResult, ScenarioError, run_dual_band_sweep, run_hybrid_vs_digital,
    run_mobile_relay,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Environment variable capping the number of worker threads used to fan
/// out Monte Carlo trials. Unset means one worker per logical CPU. The cap
/// changes wall time only, never output values.
pub const WORKER_ENV: &str = "HETSIM_WORKERS";

/// Significant digits used for every floating-point value in emitted CSV.
pub const CSV_SIGNIFICANT_DIGITS: usize = 9;

/// Errors raised while parsing, validating, or running an experiment.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("configuration parse error: {0}")]
    Parse(String),
    #[error("invalid experiment: {0}")]
    BadExperiment(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("worker pool error: {0}")]
    WorkerPool(String),
}

type Result<T> = std::result::Result<T, HarnessError>;

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

/// The three runnable scenarios, identified by their configuration tags.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    HybridVsDigital,
    MobileRelay,
    DualBandSweep,
}

impl ScenarioKind {
    /// Every scenario, in documentation order.
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::HybridVsDigital,
        ScenarioKind::MobileRelay,
        ScenarioKind::DualBandSweep,
    ];

    /// The tag used in configuration files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            ScenarioKind::HybridVsDigital => "hybrid_vs_digital",
            ScenarioKind::MobileRelay => "mobile_relay",
            ScenarioKind::DualBandSweep => "dual_band_sweep",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ScenarioKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|kind| kind.tag() == s)
            .ok_or_else(|| {
                HarnessError::BadExperiment(format!(
                    "unknown scenario {s:?}; expected one of: {}",
                    ScenarioKind::ALL.map(ScenarioKind::tag).join(", ")
                ))
            })
    }
}

/// A scenario tag together with its matching configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioConfig {
    HybridVsDigital(HybridCaseConfig),
    MobileRelay(RelayCaseConfig),
    DualBandSweep(DualBandSweepConfig),
}

impl ScenarioConfig {
    /// Default configuration for a scenario.
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::HybridVsDigital => {
                ScenarioConfig::HybridVsDigital(HybridCaseConfig::default())
            }
            ScenarioKind::MobileRelay => ScenarioConfig::MobileRelay(RelayCaseConfig::default()),
            ScenarioKind::DualBandSweep => {
                ScenarioConfig::DualBandSweep(DualBandSweepConfig::default())
            }
        }
    }

    /// The tag this configuration belongs to.
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioConfig::HybridVsDigital(_) => ScenarioKind::HybridVsDigital,
            ScenarioConfig::MobileRelay(_) => ScenarioKind::MobileRelay,
            ScenarioConfig::DualBandSweep(_) => ScenarioKind::DualBandSweep,
        }
    }

    /// Monte Carlo repetitions this configuration will run (UEs per grid
    /// point for the association sweep).
    pub fn trials(&self) -> usize {
        match self {
            ScenarioConfig::HybridVsDigital(c) => c.trials,
            ScenarioConfig::MobileRelay(c) => c.trials,
            ScenarioConfig::DualBandSweep(c) => c.ues_per_point,
        }
    }

    fn set_trials(&mut self, trials: usize) {
        match self {
            ScenarioConfig::HybridVsDigital(c) => c.trials = trials,
            ScenarioConfig::MobileRelay(c) => c.trials = trials,
            ScenarioConfig::DualBandSweep(c) => c.ues_per_point = trials,
        }
    }

    /// Validates the embedded configuration without running anything.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioConfig::HybridVsDigital(c) => c.validate()?,
            ScenarioConfig::MobileRelay(c) => c.validate()?,
            ScenarioConfig::DualBandSweep(c) => c.validate()?,
        }
        Ok(())
    }
}

/// A fully resolved experiment: scenario configuration, master seed, and
/// an optional output path. Equal specs produce byte-identical results.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

/// Command-line overrides applied on top of a parsed experiment file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output_path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    scenario: ScenarioKind,
    seed: Option<u64>,
    trials: Option<usize>,
    output_path: Option<PathBuf>,
    hybrid_vs_digital: Option<HybridCaseConfig>,
    mobile_relay: Option<RelayCaseConfig>,
    dual_band_sweep: Option<DualBandSweepConfig>,
}

impl ExperimentSpec {
    /// Default experiment for a scenario: default configuration, seed 0,
    /// no output path.
    pub fn default_for(kind: ScenarioKind) -> Self {
        Self {
            config: ScenarioConfig::default_for(kind),
            seed: 0,
            output_path: None,
        }
    }

    /// Parses an experiment from TOML text. A section named after a
    /// scenario other than the tagged one is rejected, as is any unknown
    /// key (both with a message naming the offender).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawExperiment =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;

        let sections: [(ScenarioKind, bool); 3] = [
            (ScenarioKind::HybridVsDigital, raw.hybrid_vs_digital.is_some()),
            (ScenarioKind::MobileRelay, raw.mobile_relay.is_some()),
            (ScenarioKind::DualBandSweep, raw.dual_band_sweep.is_some()),
        ];
        for (kind, present) in sections {
            if present && kind != raw.scenario {
                return Err(HarnessError::BadExperiment(format!(
                    "section [{}] does not match scenario = \"{}\"",
                    kind.tag(),
                    raw.scenario.tag()
                )));
            }
        }

        let mut config = match raw.scenario {
            ScenarioKind::HybridVsDigital => ScenarioConfig::HybridVsDigital(
                raw.hybrid_vs_digital.unwrap_or_default(),
            ),
            ScenarioKind::MobileRelay => {
                ScenarioConfig::MobileRelay(raw.mobile_relay.unwrap_or_default())
            }
            ScenarioKind::DualBandSweep => {
                ScenarioConfig::DualBandSweep(raw.dual_band_sweep.unwrap_or_default())
            }
        };
        if let Some(trials) = raw.trials {
            config.set_trials(trials);
        }
        Ok(Self {
            config,
            seed: raw.seed.unwrap_or(0),
            output_path: raw.output_path,
        })
    }

    /// Reads and parses an experiment file.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies command-line overrides (highest precedence).
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            self.config.set_trials(trials);
        }
        if let Some(path) = &overrides.output_path {
            self.output_path = Some(path.clone());
        }
    }

    /// Validates the embedded scenario configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()
    }
}

/// Renders the fully populated default experiment for a scenario as TOML
/// (tag, seed, and every configuration field with its default value).
pub fn default_config_toml(kind: ScenarioKind) -> String {
    let mut root = toml::Table::new();
    root.insert(
        "scenario".to_string(),
        toml::Value::String(kind.tag().to_string()),
    );
    root.insert("seed".to_string(), toml::Value::Integer(0));
    let section = match ScenarioConfig::default_for(kind) {
        ScenarioConfig::HybridVsDigital(c) => toml::Value::try_from(c),
        ScenarioConfig::MobileRelay(c) => toml::Value::try_from(c),
        ScenarioConfig::DualBandSweep(c) => toml::Value::try_from(c),
    }
    .expect("default configurations serialize to TOML");
    root.insert(kind.tag().to_string(), section);
    toml::to_string(&root).expect("TOML tables render")
}

// ---------------------------------------------------------------------------
// Monte Carlo statistics
// ---------------------------------------------------------------------------

/// Sample mean and standard error of a batch of Monte Carlo samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloStats {
    pub mean: f64,
    /// Standard error of the mean, `s / sqrt(n)` with the unbiased sample
    /// standard deviation; 0 for a single sample (degenerate, flagged by
    /// `n = 1`).
    pub standard_error: f64,
    pub n: usize,
}

impl MonteCarloStats {
    /// Computes stats from samples; `None` when there are no samples.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(Self {
                mean,
                standard_error: 0.0,
                n,
            });
        }
        let variance =
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        Some(Self {
            mean,
            standard_error: (variance / n as f64).sqrt(),
            n,
        })
    }
}

// ---------------------------------------------------------------------------
// Tables and CSV emission
// ---------------------------------------------------------------------------

/// One table cell: integers print exactly, floats print in decimal
/// notation with [`CSV_SIGNIFICANT_DIGITS`] significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => f.write_str(&format_significant(*v, CSV_SIGNIFICANT_DIGITS)),
        }
    }
}

/// Formats a float in plain decimal notation (never scientific) with the
/// given number of significant digits, locale-independently. Zero prints
/// as `0`; non-finite values fall back to Rust's default formatting.
pub fn format_significant(value: f64, digits: usize) -> String {
    assert!(digits >= 1, "significant digits must be at least 1");
    if !value.is_finite() {
        return format!("{value}");
    }
    if value == 0.0 {
        return "0".to_string();
    }
    // The decimal exponent comes from the exact scientific rendering, not
    // log10, which misrounds near powers of ten.
    let exponent = decimal_exponent(value.abs());
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let rendered = format!("{value:.decimals$}");
    // Rounding can carry into a new leading digit (9.99… -> 10.0…), which
    // would print one digit too many; reformat at the bumped exponent.
    let rounded: f64 = rendered.parse().expect("fixed-point rendering parses");
    if rounded != 0.0 {
        let bumped = decimal_exponent(rounded.abs());
        if bumped > exponent {
            let decimals = (digits as i32 - 1 - bumped).max(0) as usize;
            return format!("{value:.decimals$}");
        }
    }
    rendered
}

fn decimal_exponent(magnitude: f64) -> i32 {
    let sci = format!("{magnitude:e}");
    sci.split('e')
        .nth(1)
        .expect("scientific notation carries an exponent")
        .parse()
        .expect("exponent is an integer")
}

/// An ordered, rectangular result table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    /// Creates an empty table with the given column names. Names must be
    /// free of commas, quotes, and line breaks (the CSV writer does not
    /// escape).
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        assert!(!columns.is_empty(), "a table needs at least one column");
        for name in &columns {
            assert!(
                !name.contains([',', '"', '\n', '\r']),
                "column name {name:?} needs CSV escaping, which this writer does not do"
            );
        }
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    /// Appends one row. Panics if the row width differs from the header —
    /// a programming error in the table builder, not an input error.
    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the {}-column schema",
            self.columns.len()
        );
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// Renders the table as CSV: one header row, one line-feed-terminated
    /// line per row, decimal float formatting, no locale dependence.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for value in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&value.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Writes the CSV rendering to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

/// Outcome of one experiment run: the result table plus provenance.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scenario: ScenarioKind,
    pub seed: u64,
    /// Monte Carlo repetitions (UEs per grid point for the sweep).
    pub trials: usize,
    pub table: Table,
    pub wall_time: Duration,
    /// Human-readable diagnostics: degenerate statistics, skipped grid
    /// points, and similar non-fatal conditions.
    pub notes: Vec<String>,
}

fn worker_cap() -> Result<Option<usize>> {
    match std::env::var(WORKER_ENV) {
        Ok(text) => {
            let workers: usize = text.trim().parse().map_err(|_| {
                HarnessError::BadExperiment(format!(
                    "{WORKER_ENV} must be a positive integer, got {text:?}"
                ))
            })?;
            if workers == 0 {
                return Err(HarnessError::BadExperiment(format!(
                    "{WORKER_ENV} must be a positive integer, got 0"
                )));
            }
            Ok(Some(workers))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => Err(HarnessError::BadExperiment(format!(
            "{WORKER_ENV} is not valid unicode"
        ))),
    }
}

/// Runs an experiment to a result table. Honors [`WORKER_ENV`] by running
/// the scenario inside a thread pool of that size; values are identical
/// for every worker count because scenario reductions are trial-ordered.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let started = Instant::now();
    let execute = || -> Result<(Table, Vec<String>)> {
        match &spec.config {
            ScenarioConfig::HybridVsDigital(config) => {
                let result = run_hybrid_vs_digital(config, spec.seed)?;
                Ok((hybrid_vs_digital_table(&result), Vec::new()))
            }
            ScenarioConfig::MobileRelay(config) => {
                let result = run_mobile_relay(config, spec.seed)?;
                Ok((relay_table(&result), Vec::new()))
            }
            ScenarioConfig::DualBandSweep(config) => {
                let result = run_dual_band_sweep(config, spec.seed)?;
                let notes = result
                    .skipped_grid_points
                    .iter()
                    .map(|(a, b)| {
                        format!("skipped degenerate grid point a = {a} m, b = {b} m (a must be < b)")
                    })
                    .collect();
                Ok((dual_band_table(&result), notes))
            }
        }
    };

    let (table, mut notes) = match worker_cap()? {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::WorkerPool(e.to_string()))?
            .install(execute),
        None => execute(),
    }?;

    let trials = spec.config.trials();
    if trials == 1 {
        notes.push(
            "single repetition: standard errors are degenerate and reported as 0 (n = 1)"
                .to_string(),
        );
    }
    Ok(RunSummary {
        scenario: spec.config.kind(),
        seed: spec.seed,
        trials,
        table,
        wall_time: started.elapsed(),
        notes,
    })
}

fn stats_or_zero(samples: &[f64]) -> MonteCarloStats {
    MonteCarloStats::from_samples(samples).unwrap_or(MonteCarloStats {
        mean: 0.0,
        standard_error: 0.0,
        n: 0,
    })
}

/// One row per SNR grid point: means, standard errors, the ratio of the
/// hybrid mean to the digital mean, and the trial count.
fn hybrid_vs_digital_table(result: &HybridVsDigitalResult) -> Table {
    let mut table = Table::new([
        "snr_db",
        "digital_rate_bits_per_s_per_hz",
        "hybrid_rate_bits_per_s_per_hz",
        "hybrid_phased_rx_rate_bits_per_s_per_hz",
        "digital_se",
        "hybrid_se",
        "hybrid_phased_rx_se",
        "hybrid_to_digital_ratio",
        "n",
    ]);
    for (i, &snr) in result.snr_grid_db.iter().enumerate() {
        if result.digital[i].is_empty() {
            continue;
        }
        let digital = stats_or_zero(&result.digital[i]);
        let hybrid = stats_or_zero(&result.hybrid[i]);
        let phased = stats_or_zero(&result.hybrid_phased_rx[i]);
        let ratio = if digital.mean > 0.0 {
            hybrid.mean / digital.mean
        } else {
            0.0
        };
        table.push_row(vec![
            Value::Float(snr),
            Value::Float(digital.mean),
            Value::Float(hybrid.mean),
            Value::Float(phased.mean),
            Value::Float(digital.standard_error),
            Value::Float(hybrid.standard_error),
            Value::Float(phased.standard_error),
            Value::Float(ratio),
            Value::Int(digital.n as u64),
        ]);
    }
    table
}

/// One row per relay antenna count. The direct-service columns repeat the
/// same statistics on every row (the comparison is paired).
fn relay_table(result: &RelayResult) -> Table {
    let mut table = Table::new([
        "M",
        "direct_rate_bps",
        "relay_rate_bps",
        "direct_se",
        "relay_se",
        "n",
    ]);
    if result.direct_bits_per_s.is_empty() {
        return table;
    }
    let direct = stats_or_zero(&result.direct_bits_per_s);
    for (i, &m) in result.relay_antenna_counts.iter().enumerate() {
        let relay = stats_or_zero(&result.relay_bits_per_s[i]);
        table.push_row(vec![
            Value::Int(m as u64),
            Value::Float(direct.mean),
            Value::Float(relay.mean),
            Value::Float(direct.standard_error),
            Value::Float(relay.standard_error),
            Value::Int(relay.n as u64),
        ]);
    }
    table
}

/// One row per valid (a, b) grid point.
fn dual_band_table(result: &DualBandSweepResult) -> Table {
    let mut table = Table::new([
        "inner_radius_a_m",
        "middle_radius_b_m",
        "inner_fraction",
        "middle_fraction",
        "outer_fraction",
        "inner_mean_rate_bps",
        "middle_mean_rate_bps",
        "outer_mean_rate_bps",
        "mmwave_macro_interference_w",
        "ues",
    ]);
    for row in &result.rows {
        table.push_row(vec![
            Value::Float(row.inner_radius_a_m),
            Value::Float(row.middle_radius_b_m),
            Value::Float(row.inner_fraction),
            Value::Float(row.middle_fraction),
            Value::Float(row.outer_fraction),
            Value::Float(row.inner_mean_rate_bps),
            Value::Float(row.middle_mean_rate_bps),
            Value::Float(row.outer_mean_rate_bps),
            Value::Float(row.mmwave_macro_interference_w),
            Value::Int(row.ues as u64),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn significant_formatting_matches_hand_oracles() {
        assert_eq!(format_significant(1234.56789012, 9), "1234.56789");
        assert_eq!(format_significant(0.000123456789012, 9), "0.000123456789");
        assert_eq!(format_significant(-2.5, 9), "-2.50000000");
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(5.0e6, 9), "5000000.00");
        assert_eq!(format_significant(1.0, 3), "1.00");
        assert_eq!(format_significant(0.25, 9), "0.250000000");
    }

    #[test]
    fn significant_formatting_survives_rounding_carry() {
        // 999_999_999.6 rounds to a 10-digit leading value; the formatter
        // must re-anchor at the bumped exponent, not print 10 digits.
        assert_eq!(format_significant(999_999_999.6, 9), "1000000000");
        assert_eq!(format_significant(0.99999999996, 9), "1.00000000");
    }

    proptest! {
        #[test]
        fn formatted_floats_round_trip_to_nine_digits(
            value in prop_oneof![
                -1.0e12..1.0e12_f64,
                -1.0e-6..1.0e-6_f64,
            ]
        ) {
            let text = format_significant(value, 9);
            let parsed: f64 = text.parse().unwrap();
            if value == 0.0 {
                prop_assert_eq!(parsed, 0.0);
            } else {
                // Half-ulp of the ninth significant digit.
                prop_assert!(
                    (parsed - value).abs() <= value.abs() * 5.0e-9,
                    "{} -> {} -> {}", value, text, parsed
                );
            }
            prop_assert!(!text.contains(['e', 'E']), "decimal notation only: {}", text);
        }
    }

    #[test]
    fn stats_match_a_hand_computed_batch() {
        let stats = MonteCarloStats::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(stats.mean, 2.5, epsilon = 1e-15);
        // Unbiased variance 5/3; SE = sqrt(5/12).
        assert_relative_eq!(stats.standard_error, (5.0f64 / 12.0).sqrt(), epsilon = 1e-15);
        assert_eq!(stats.n, 4);
    }

    #[test]
    fn single_sample_stats_are_degenerate_but_flagged() {
        let stats = MonteCarloStats::from_samples(&[7.0]).unwrap();
        assert_eq!(stats.mean, 7.0);
        assert_eq!(stats.standard_error, 0.0);
        assert_eq!(stats.n, 1);
        assert!(MonteCarloStats::from_samples(&[]).is_none());
    }

    #[test]
    fn empty_table_renders_header_only() {
        let table = Table::new(["a", "b"]);
        assert_eq!(table.to_csv_string(), "a,b\n");
    }

    #[test]
    fn csv_uses_line_feeds_and_decimal_notation() {
        let mut table = Table::new(["M", "rate"]);
        table.push_row(vec![Value::Int(4), Value::Float(2.31e8)]);
        table.push_row(vec![Value::Int(8), Value::Float(0.5)]);
        assert_eq!(
            table.to_csv_string(),
            "M,rate\n4,231000000\n8,0.500000000\n"
        );
    }

    #[test]
    fn minimal_configs_parse_with_full_defaults() {
        for kind in ScenarioKind::ALL {
            let spec =
                ExperimentSpec::from_toml_str(&format!("scenario = \"{}\"\n", kind.tag()))
                    .unwrap();
            assert_eq!(spec, ExperimentSpec::default_for(kind));
            spec.validate().unwrap();
        }
    }

    #[test]
    fn default_config_rendering_round_trips() {
        for kind in ScenarioKind::ALL {
            let text = default_config_toml(kind);
            let spec = ExperimentSpec::from_toml_str(&text).unwrap();
            assert_eq!(spec.config, ScenarioConfig::default_for(kind));
            assert_eq!(spec.seed, 0);
        }
    }

    #[test]
    fn trials_precedence_is_top_level_over_section() {
        let spec = ExperimentSpec::from_toml_str(
            "scenario = \"mobile_relay\"\ntrials = 7\n[mobile_relay]\ntrials = 9\n",
        )
        .unwrap();
        assert_eq!(spec.config.trials(), 7);
        // Command line beats both.
        let mut spec = spec;
        spec.apply(&Overrides {
            trials: Some(3),
            ..Overrides::default()
        });
        assert_eq!(spec.config.trials(), 3);
    }

    #[test]
    fn top_level_trials_map_to_ues_per_point_for_the_sweep() {
        let spec =
            ExperimentSpec::from_toml_str("scenario = \"dual_band_sweep\"\ntrials = 123\n")
                .unwrap();
        match &spec.config {
            ScenarioConfig::DualBandSweep(c) => assert_eq!(c.ues_per_point, 123),
            other => panic!("wrong config variant: {other:?}"),
        }
    }

    #[test]
    fn mismatched_scenario_section_is_rejected_by_name() {
        let err = ExperimentSpec::from_toml_str(
            "scenario = \"hybrid_vs_digital\"\n[mobile_relay]\ntrials = 2\n",
        )
        .unwrap_err();
        let message = err.to_string();
        assert!(message.contains("[mobile_relay]"), "{message}");
        assert!(message.contains("hybrid_vs_digital"), "{message}");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = ExperimentSpec::from_toml_str(
            "scenario = \"mobile_relay\"\n[mobile_relay]\nuser = 4\n",
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Parse(_)), "{err}");
        assert!(err.to_string().contains("user"), "{err}");
    }

    #[test]
    fn infeasible_config_surfaces_the_violated_constraint() {
        let spec = ExperimentSpec::from_toml_str(
            "scenario = \"hybrid_vs_digital\"\n[hybrid_vs_digital]\nusers = 9\nn_rf_tx = 8\nstreams_per_user = 2\n",
        )
        .unwrap();
        let err = run_experiment(&spec).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("n_rf_tx"), "{message}");
    }

    fn tiny_relay_spec() -> ExperimentSpec {
        ExperimentSpec::from_toml_str(
            "scenario = \"mobile_relay\"\nseed = 5\ntrials = 4\n\
             [mobile_relay]\nbs_antennas = 16\nusers = 2\nrelay_antenna_counts = [2, 4]\n",
        )
        .unwrap()
    }

    #[test]
    fn identical_specs_render_identical_csv() {
        let spec = tiny_relay_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.table.to_csv_string(), b.table.to_csv_string());
        assert_eq!(a.scenario, ScenarioKind::MobileRelay);
        assert_eq!(a.seed, 5);
        assert_eq!(a.trials, 4);
    }

    #[test]
    fn relay_table_uses_the_pinned_schema() {
        let summary = run_experiment(&tiny_relay_spec()).unwrap();
        assert_eq!(
            summary.table.columns(),
            [
                "M",
                "direct_rate_bps",
                "relay_rate_bps",
                "direct_se",
                "relay_se",
                "n"
            ]
        );
        assert_eq!(summary.table.rows().len(), 2);
        assert_eq!(summary.table.rows()[0][0], Value::Int(2));
        assert_eq!(summary.table.rows()[0][5], Value::Int(4));
    }

    #[test]
    fn emitted_csv_round_trips_through_a_parser() {
        let summary = run_experiment(&tiny_relay_spec()).unwrap();
        let csv = summary.table.to_csv_string();
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), summary.table.columns().len());
        for (line, row) in lines.zip(summary.table.rows()) {
            for (cell, value) in line.split(',').zip(row) {
                match value {
                    Value::Int(v) => assert_eq!(cell.parse::<u64>().unwrap(), *v),
                    Value::Float(v) => {
                        let parsed: f64 = cell.parse().unwrap();
                        if *v == 0.0 {
                            assert_eq!(parsed, 0.0);
                        } else {
                            assert!((parsed - v).abs() <= v.abs() * 5.0e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_trials_produce_a_header_only_table() {
        let mut spec = tiny_relay_spec();
        spec.apply(&Overrides {
            trials: Some(0),
            ..Overrides::default()
        });
        let summary = run_experiment(&spec).unwrap();
        assert!(summary.table.rows().is_empty());
        assert!(summary.table.to_csv_string().starts_with("M,"));
    }

    #[test]
    fn single_trial_runs_flag_degenerate_statistics() {
        let mut spec = tiny_relay_spec();
        spec.apply(&Overrides {
            trials: Some(1),
            ..Overrides::default()
        });
        let summary = run_experiment(&spec).unwrap();
        assert!(summary.notes.iter().any(|n| n.contains("n = 1")), "{:?}", summary.notes);
        // SE columns are exactly 0.
        assert_eq!(summary.table.rows()[0][3], Value::Float(0.0));
        assert_eq!(summary.table.rows()[0][4], Value::Float(0.0));
    }

    #[test]
    fn sweep_summary_reports_skipped_grid_points() {
        let spec = ExperimentSpec::from_toml_str(
            "scenario = \"dual_band_sweep\"\ntrials = 50\n\
             [dual_band_sweep]\ninner_radius_grid_m = [100.0]\nmiddle_radius_grid_m = [50.0, 200.0]\n",
        )
        .unwrap();
        let summary = run_experiment(&spec).unwrap();
        assert_eq!(summary.table.rows().len(), 1);
        assert!(
            summary.notes.iter().any(|n| n.contains("a = 100")),
            "{:?}",
            summary.notes
        );
    }

    #[test]
    fn scenario_kind_tags_round_trip_through_fromstr() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.tag().parse::<ScenarioKind>().unwrap(), kind);
        }
        assert!("macro_only".parse::<ScenarioKind>().is_err());
    }
}
