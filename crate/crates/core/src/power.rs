//! Monte Carlo size and power studies.
//!
//! For every grid value and run a dataset is drawn from the scenario and each
//! configured test is applied to it. Seeds are derived per cell from
//! `(grid index, run index, test name)`, so adding a test or a grid value
//! never changes the draws of another cell.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{energy_test, mmd_test};
use crate::dist::{combine_seed, derive_stream, label_hash, std_normal_quantile, RandomStream, ALGORITHM_ID};
use crate::error::{Error, Result};
use crate::generators::ScenarioSpec;
use crate::ksample::{GroupedSample, KSampleTest};
use crate::spaces::ObjectSample;

/// Tests available to a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyTest {
    TnAsymptotic,
    TnPermutation,
    /// Also accepted as `"tn"`.
    #[serde(alias = "tn")]
    TnBootstrap,
    Energy,
    Mmd,
}

impl StudyTest {
    pub const ALL: [StudyTest; 5] = [
        StudyTest::TnAsymptotic,
        StudyTest::TnPermutation,
        StudyTest::TnBootstrap,
        StudyTest::Energy,
        StudyTest::Mmd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyTest::TnAsymptotic => "tn_asymptotic",
            StudyTest::TnPermutation => "tn_permutation",
            StudyTest::TnBootstrap => "tn_bootstrap",
            StudyTest::Energy => "energy",
            StudyTest::Mmd => "mmd",
        }
    }

    fn uses_resampling(self) -> bool {
        self != StudyTest::TnAsymptotic
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_runs() -> usize {
    200
}

fn default_replicates() -> usize {
    500
}

/// A study, as read from a JSON configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioSpec,
    /// Scenario parameter values (δ, r, γ, m or β).
    pub grid: Vec<f64>,
    pub tests: Vec<StudyTest>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_runs")]
    pub monte_carlo_runs: usize,
    /// Resampling replicates per test.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// CSV output path; a `<output>.meta.json` sidecar is written next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(scenario: ScenarioSpec, grid: Vec<f64>, tests: Vec<StudyTest>) -> Self {
        Self {
            scenario,
            grid,
            tests,
            alpha: default_alpha(),
            monte_carlo_runs: default_runs(),
            replicates: default_replicates(),
            seed: 0,
            output: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| Error::data(path, Some(e.line()), format!("invalid study configuration: {e}")))?;
        config.validate().map_err(|e| Error::data(path, None, e.to_string()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.grid.is_empty() || self.grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("the parameter grid must be non-empty and finite"));
        }
        if self.tests.is_empty() {
            return Err(Error::input("at least one test must be configured"));
        }
        if self.monte_carlo_runs == 0 {
            return Err(Error::input("monte_carlo_runs must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let two_sample = self.scenario.group_sizes.len() == 2;
        if let Some(t) = self
            .tests
            .iter()
            .find(|t| matches!(t, StudyTest::Energy | StudyTest::Mmd) && !two_sample)
        {
            return Err(Error::input(format!("{} needs exactly 2 groups", t.name())));
        }
        if self.tests.iter().any(|t| t.uses_resampling()) && self.replicates < 99 {
            return Err(Error::input(format!(
                "resampling tests need at least 99 replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }

    fn with_grid(&self, grid: Vec<f64>) -> Self {
        Self { grid, ..self.clone() }
    }
}

/// Stream that generates the dataset of run `run` at grid index `grid_index`.
pub fn data_stream(root_seed: u64, grid_index: usize, run: usize) -> RandomStream {
    derive_stream(
        combine_seed(root_seed, &[grid_index as u64, run as u64, label_hash("data")]),
        0,
    )
}

/// Resampling seed of one test in one cell.
pub fn cell_seed(root_seed: u64, grid_index: usize, run: usize, test: StudyTest) -> u64 {
    combine_seed(root_seed, &[grid_index as u64, run as u64, label_hash(test.name())])
}

/// Outcome of one test on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Decided { reject: bool, discarded_replicates: usize },
    Failed(String),
}

/// Applies `test` to `data` with the given resampling seed.
pub fn run_single_test(
    test: StudyTest,
    data: &GroupedSample<ObjectSample>,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<CellOutcome> {
    let ksample = KSampleTest::new().alpha(alpha).replicates(replicates).seed(seed);
    let (reject, discarded_replicates) = match test {
        StudyTest::TnAsymptotic => (ksample.asymptotic(data)?.reject, 0),
        StudyTest::TnPermutation => {
            let r = ksample.permutation(data)?;
            (r.reject, r.discarded_replicates)
        }
        StudyTest::TnBootstrap => {
            let r = ksample.bootstrap(data)?;
            (r.reject, r.discarded_replicates)
        }
        StudyTest::Energy => (energy_test(data, replicates, seed)?.reject(alpha), 0),
        StudyTest::Mmd => (mmd_test(data, replicates, seed)?.reject(alpha), 0),
    };
    Ok(CellOutcome::Decided {
        reject,
        discarded_replicates,
    })
}

/// Aggregated results for one (grid value, test) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub param: f64,
    pub test: StudyTest,
    /// Runs attempted, including failed ones.
    pub n_runs: usize,
    pub rejections: usize,
    /// Runs where data generation or the test failed; excluded from `rate`.
    pub errors: usize,
    pub discarded_replicates: usize,
    /// `rejections / (n_runs - errors)`; NaN when every run failed.
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / (n_runs - errors))`.
    pub se: f64,
}

impl PowerCell {
    pub fn completed_runs(&self) -> usize {
        self.n_runs - self.errors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub scenario: String,
    pub cells: Vec<PowerCell>,
}

impl PowerCurve {
    pub fn cell(&self, param: f64, test: StudyTest) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.param == param && c.test == test)
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "param",
    "test",
    "n_runs",
    "rejections",
    "errors",
    "rate",
    "se",
];

/// Runs the study, writing CSV rows (and the metadata sidecar) to
/// `config.output` when set.
pub fn run_power_study(config: &StudyConfig) -> Result<PowerCurve> {
    match &config.output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let curve = run_power_study_to(config, file).map_err(|e| match e {
                Error::Input(msg) if msg.starts_with("failed to write") => Error::data(path, None, msg),
                other => other,
            })?;
            write_metadata(config, &metadata_path(path))?;
            Ok(curve)
        }
        None => run_power_study_to(config, std::io::sink()),
    }
}

/// Runs the study, streaming CSV rows to `out` after each grid value.
pub fn run_power_study_to<W: Write>(config: &StudyConfig, out: W) -> Result<PowerCurve> {
    config.validate()?;
    let mut writer = csv::Writer::from_writer(out);
    let write_err = |e: csv::Error| Error::input(format!("failed to write study output: {e}"));
    writer.write_record(CSV_HEADER).map_err(write_err)?;
    writer.flush().map_err(|e| write_err(e.into()))?;

    let scenario = config.scenario.name();
    let mut cells = Vec::with_capacity(config.grid.len() * config.tests.len());
    for (g, &param) in config.grid.iter().enumerate() {
        let outcomes: Vec<Vec<CellOutcome>> = (0..config.monte_carlo_runs)
            .into_par_iter()
            .map(|run| run_cell_group(config, g, param, run))
            .collect();
        for (t, &test) in config.tests.iter().enumerate() {
            let cell = aggregate(param, test, outcomes.iter().map(|o| &o[t]));
            writer
                .write_record([
                    scenario.to_string(),
                    param.to_string(),
                    test.name().to_string(),
                    cell.n_runs.to_string(),
                    cell.rejections.to_string(),
                    cell.errors.to_string(),
                    cell.rate.to_string(),
                    cell.se.to_string(),
                ])
                .map_err(write_err)?;
            cells.push(cell);
        }
        writer.flush().map_err(|e| write_err(e.into()))?;
    }
    Ok(PowerCurve {
        scenario: scenario.to_string(),
        cells,
    })
}

/// Generates the dataset of one run and applies every configured test.
fn run_cell_group(config: &StudyConfig, g: usize, param: f64, run: usize) -> Vec<CellOutcome> {
    let data = match config.scenario.generate(param, &mut data_stream(config.seed, g, run)) {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("generation failed: {e}");
            return vec![CellOutcome::Failed(msg); config.tests.len()];
        }
    };
    config
        .tests
        .iter()
        .map(|&test| {
            let seed = cell_seed(config.seed, g, run, test);
            run_single_test(test, &data, config.alpha, config.replicates, seed)
                .unwrap_or_else(|e| CellOutcome::Failed(e.to_string()))
        })
        .collect()
}

fn aggregate<'a>(param: f64, test: StudyTest, outcomes: impl Iterator<Item = &'a CellOutcome>) -> PowerCell {
    let (mut n_runs, mut rejections, mut errors, mut discarded) = (0, 0, 0, 0);
    for o in outcomes {
        n_runs += 1;
        match o {
            CellOutcome::Decided {
                reject,
                discarded_replicates,
            } => {
                rejections += usize::from(*reject);
                discarded += discarded_replicates;
            }
            CellOutcome::Failed(_) => errors += 1,
        }
    }
    let done = (n_runs - errors) as f64;
    let rate = rejections as f64 / done;
    PowerCell {
        param,
        test,
        n_runs,
        rejections,
        errors,
        discarded_replicates: discarded,
        rate,
        se: (rate * (1.0 - rate) / done).sqrt(),
    }
}

pub fn metadata_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_metadata(config: &StudyConfig, path: &Path) -> Result<()> {
    let meta = serde_json::json!({
        "config": config,
        "algorithm_id": ALGORITHM_ID,
        "version": env!("CARGO_PKG_VERSION"),
        "csv_columns": CSV_HEADER,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Empirical size of one test at the null parameter with a 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub test: StudyTest,
    pub param: f64,
    pub n_runs: usize,
    pub rejections: usize,
    pub errors: usize,
    pub size: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Runs `config` at the scenario's null parameter only.
pub fn empirical_size_report(config: &StudyConfig) -> Result<Vec<SizeRow>> {
    let null = config.scenario.null_param().ok_or_else(|| {
        Error::input(format!(
            "scenario {} has no null parameter value",
            config.scenario.name()
        ))
    })?;
    let curve = run_power_study(&config.with_grid(vec![null]))?;
    curve
        .cells
        .iter()
        .map(|c| {
            let (lo, hi) = wilson_interval(c.rejections, c.completed_runs(), 0.95)?;
            Ok(SizeRow {
                test: c.test,
                param: c.param,
                n_runs: c.n_runs,
                rejections: c.rejections,
                errors: c.errors,
                size: c.rate,
                ci_lower: lo,
                ci_upper: hi,
            })
        })
        .collect()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::input("no completed runs"));
    }
    let z = std_normal_quantile(0.5 + level / 2.0)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}
