//! Canned configurations for the published simulation tables, run through
//! the experiment harness and printed next to the published values.

use std::fmt::Write as _;
use std::path::PathBuf;

use vbvarsel::eval::Quartiles;
use vbvarsel::{Correlation, Misspecification, RepetitionSummary, TemperatureSchedule};

use crate::config::{DataSource, PriorScale, RunConfig, SimulationConfig};
use crate::error::{CliError, Result};
use crate::experiment::{run_experiment, FailedRepetition};

/// Published median [lower, upper] cells of one row, as printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishedRow {
    pub time: Option<&'static str>,
    pub relevant: &'static str,
    pub irrelevant: &'static str,
    pub ari: &'static str,
}

/// One row of a table: its label, the run that reproduces it and the
/// published values.
#[derive(Debug, Clone)]
pub struct CannedRow {
    pub setting: String,
    pub config: RunConfig,
    pub published: PublishedRow,
}

#[derive(Debug, Clone)]
pub struct CannedTable {
    pub id: &'static str,
    pub title: &'static str,
    pub rows: Vec<CannedRow>,
}

pub const TABLE_IDS: &[&str] = &[
    "1", "2", "3", "4", "S3", "S4", "S5", "S6", "S7", "misspec1", "misspec2",
];

fn sim(n: usize, frac: f64) -> SimulationConfig {
    SimulationConfig {
        n,
        covariates: 200,
        relevant_fraction: frac,
        correlation: Correlation::None,
        noise_sd: 0.0,
        misspecification: Misspecification::None,
        permuted_copies: 0,
    }
}

fn row(setting: impl Into<String>, config: RunConfig, published: PublishedRow) -> CannedRow {
    CannedRow {
        setting: setting.into(),
        config,
        published,
    }
}

fn cells(
    time: Option<&'static str>,
    relevant: &'static str,
    irrelevant: &'static str,
    ari: &'static str,
) -> PublishedRow {
    PublishedRow {
        time,
        relevant,
        irrelevant,
        ari,
    }
}

fn with_schedule(mut config: RunConfig, schedule: TemperatureSchedule) -> RunConfig {
    config.schedule = schedule;
    config
}

fn fixed(t0: f64) -> TemperatureSchedule {
    TemperatureSchedule::fixed(t0).expect("t0 >= 1")
}

fn geometric(t0: f64) -> TemperatureSchedule {
    TemperatureSchedule::geometric(t0, 5).expect("valid geometric schedule")
}

fn harmonic(t0: f64) -> TemperatureSchedule {
    TemperatureSchedule::harmonic(t0, 5).expect("valid harmonic schedule")
}

fn base_table(
    id: &'static str,
    title: &'static str,
    frac: f64,
    published: [PublishedRow; 2],
) -> CannedTable {
    let [small, large] = published;
    CannedTable {
        id,
        title,
        rows: vec![
            row(
                "n=100",
                RunConfig::new(DataSource::Simulate(sim(100, frac))),
                small,
            ),
            row(
                "n=1000",
                RunConfig::new(DataSource::Simulate(sim(1000, frac))),
                large,
            ),
        ],
    }
}

/// Correlated data runs start every covariate selected, as criterion runs do.
fn correlated(correlation: Correlation) -> RunConfig {
    let mut config = RunConfig::new(DataSource::Simulate(SimulationConfig {
        correlation,
        ..sim(100, 0.1)
    }));
    config.model.c_init = 1.0;
    config
}

fn noisy(sd: f64) -> RunConfig {
    RunConfig::new(DataSource::Simulate(SimulationConfig {
        noise_sd: sd,
        ..sim(100, 0.1)
    }))
}

fn misspecified(n: usize, frac: f64, m: Misspecification, standardize: bool) -> RunConfig {
    let mut config = RunConfig::new(DataSource::Simulate(SimulationConfig {
        misspecification: m,
        ..sim(n, frac)
    }));
    config.model.standardize = standardize;
    config
}

/// The canned configuration for `id`, seeds and repetition count at their
/// defaults.
pub fn canned_table(id: &str) -> Result<CannedTable> {
    let one = "1 [1, 1]";
    let table = match id {
        "1" => base_table(
            "1",
            "base simulation, 5% relevant",
            0.05,
            [
                cells(Some("1.30 [1.19, 2.79]"), one, one, "0.99 [0.98, 1]"),
                cells(Some("27.5 [27.4, 27.5]"), one, one, "0.95 [0.90, 0.96]"),
            ],
        ),
        "2" => base_table(
            "2",
            "base simulation, 10% relevant",
            0.1,
            [
                cells(Some("3.23 [1.30, 3.23]"), one, "1 [0.99, 1]", "1 [0.98, 1]"),
                cells(
                    Some("27.6 [27.5, 28.3]"),
                    one,
                    "1 [0.99, 1]",
                    "0.92 [0.87, 0.99]",
                ),
            ],
        ),
        "3" => base_table(
            "3",
            "base simulation, 25% relevant",
            0.25,
            [
                cells(Some("3.22 [3.21, 3.23]"), one, one, one),
                cells(Some("27.5 [27.5, 27.5]"), one, "1 [0.99, 1]", one),
            ],
        ),
        "4" => base_table(
            "4",
            "base simulation, 50% relevant",
            0.5,
            [
                cells(Some("3.25 [3.24, 3.26]"), one, one, one),
                cells(Some("27.8 [27.7, 27.9]"), one, "1 [0.99, 1]", one),
            ],
        ),
        "S3" => {
            let data = || correlated(Correlation::PerClusterAndCovariate { lo: 0.0, hi: 0.5 });
            CannedTable {
                id: "S3",
                title: "correlation sampled per cluster and covariate in [0, 0.5], 10% relevant",
                rows: vec![
                    row(
                        "T=1",
                        data(),
                        cells(None, one, "0.99 [0.99, 0.99]", "0.48 [0.41, 0.54]"),
                    ),
                    row(
                        "T=2 geometric",
                        with_schedule(data(), geometric(2.0)),
                        cells(None, one, one, "0.69 [0.69, 0.71]"),
                    ),
                    row(
                        "T=2 fixed",
                        with_schedule(data(), fixed(2.0)),
                        cells(None, one, one, "0.59 [0.40, 0.71]"),
                    ),
                ],
            }
        }
        "S4" => {
            let data = |rho| correlated(Correlation::FixedAll { rho });
            CannedTable {
                id: "S4",
                title: "fixed correlation across all covariates and clusters, 10% relevant",
                rows: vec![
                    row(
                        "rho=0.1 T=1",
                        data(0.1),
                        cells(None, one, "1 [0.99, 1]", "0.97 [0.97, 0.97]"),
                    ),
                    row(
                        "rho=0.1 T=2 harmonic",
                        with_schedule(data(0.1), harmonic(2.0)),
                        cells(None, one, one, "1 [0.97, 1]"),
                    ),
                    row(
                        "rho=0.5 T=1",
                        data(0.5),
                        cells(None, one, "1 [0.99, 1]", "0.68 [0.50, 0.71]"),
                    ),
                    row(
                        "rho=0.5 T=3 geometric",
                        with_schedule(data(0.5), geometric(3.0)),
                        cells(None, one, one, "0.76 [0.76, 1]"),
                    ),
                    row(
                        "rho=0.1 T=2 fixed",
                        with_schedule(data(0.1), fixed(2.0)),
                        cells(None, one, one, one),
                    ),
                    row(
                        "rho=0.5 T=2 fixed",
                        with_schedule(data(0.5), fixed(2.0)),
                        cells(None, one, one, "0.70 [0.70, 0.73]"),
                    ),
                ],
            }
        }
        "S5" => {
            let data = || correlated(Correlation::PerCluster { lo: 0.0, hi: 0.5 });
            CannedTable {
                id: "S5",
                title: "correlation sampled per cluster in [0, 0.5], 10% relevant",
                rows: vec![
                    row(
                        "T=1",
                        data(),
                        cells(None, one, "1 [0.99, 1]", "0.65 [0.65, 0.70]"),
                    ),
                    row(
                        "T=2 geometric",
                        with_schedule(data(), geometric(2.0)),
                        cells(None, one, one, "0.74 [0.74, 1]"),
                    ),
                    row(
                        "T=2 fixed",
                        with_schedule(data(), fixed(2.0)),
                        cells(None, one, one, "0.71 [0.67, 1]"),
                    ),
                ],
            }
        }
        "S6" => {
            let optimal = || RunConfig::new(DataSource::Simulate(sim(100, 0.1)));
            let suboptimal = || {
                let mut c = optimal();
                c.model.b0 = PriorScale::Uniform { lo: 0.01, hi: 1.0 };
                c
            };
            CannedTable {
                id: "S6",
                title: "optimal and sub-optimal (b0 ~ U[0.01, 1]) initialisation, 10% relevant",
                rows: vec![
                    row("optimal T=1", optimal(), cells(None, one, one, one)),
                    row(
                        "optimal T=3 geometric",
                        with_schedule(optimal(), geometric(3.0)),
                        cells(None, one, one, one),
                    ),
                    row(
                        "optimal T=2 harmonic",
                        with_schedule(optimal(), harmonic(2.0)),
                        cells(None, one, one, one),
                    ),
                    row(
                        "sub-optimal T=1",
                        suboptimal(),
                        cells(None, one, "0.98 [0.97, 0.99]", "0.84 [0.75, 0.88]"),
                    ),
                    row(
                        "sub-optimal T=3 geometric",
                        with_schedule(suboptimal(), geometric(3.0)),
                        cells(None, one, one, "1 [0.70, 1]"),
                    ),
                    row(
                        "sub-optimal T=2 harmonic",
                        with_schedule(suboptimal(), harmonic(2.0)),
                        cells(None, one, one, "1 [0.94, 1]"),
                    ),
                    row(
                        "optimal T=2 fixed",
                        with_schedule(optimal(), fixed(2.0)),
                        cells(None, one, one, one),
                    ),
                    row(
                        "sub-optimal T=2 fixed",
                        with_schedule(suboptimal(), fixed(2.0)),
                        cells(None, one, one, "1 [0.84, 1]"),
                    ),
                ],
            }
        }
        "S7" => CannedTable {
            id: "S7",
            title: "added Gaussian noise, 10% relevant",
            rows: vec![
                row(
                    "sd=0.1 T=1",
                    noisy(0.1),
                    cells(None, one, "0.98 [0.98, 1]", "0.89 [0.86, 0.95]"),
                ),
                row(
                    "sd=0.1 T=3 geometric",
                    with_schedule(noisy(0.1), geometric(3.0)),
                    cells(None, one, one, "1 [0.93, 1]"),
                ),
                row(
                    "sd=0.1 T=3 harmonic",
                    with_schedule(noisy(0.1), harmonic(3.0)),
                    cells(None, one, one, one),
                ),
                row(
                    "sd=0.5 T=1",
                    noisy(0.5),
                    cells(None, one, "0.98 [0.97, 0.98]", "0.90 [0.65, 0.92]"),
                ),
                row(
                    "sd=0.5 T=2 geometric",
                    with_schedule(noisy(0.5), geometric(2.0)),
                    cells(None, one, one, "1 [0.77, 1]"),
                ),
                row(
                    "sd=0.5 T=2 harmonic",
                    with_schedule(noisy(0.5), harmonic(2.0)),
                    cells(None, one, one, one),
                ),
                row(
                    "sd=0.1 T=2 fixed",
                    with_schedule(noisy(0.1), fixed(2.0)),
                    cells(None, one, one, one),
                ),
                row(
                    "sd=0.5 T=4 fixed",
                    with_schedule(noisy(0.5), fixed(4.0)),
                    cells(None, one, one, "1 [0.70, 1]"),
                ),
            ],
        },
        "misspec1" => {
            let m = || Misspecification::StudentTNoise {
                dof: vec![2.0, 3.0, 3.0],
            };
            let data = |n, frac| misspecified(n, frac, m(), false);
            CannedTable {
                id: "misspec1",
                title: "Student-t noise (df 2, 3, 3) on Gaussian clusters, unstandardized",
                rows: vec![
                    row(
                        "n=100 10%",
                        data(100, 0.1),
                        cells(
                            Some("3.2 [2.5, 5.2]"),
                            one,
                            "0.99 [0.98, 1]",
                            "0.60 [0.58, 0.68]",
                        ),
                    ),
                    row(
                        "n=100 25%",
                        data(100, 0.25),
                        cells(Some("4.2 [1.9, 5.6]"), one, one, "0.56 [0.49, 0.65]"),
                    ),
                    row(
                        "n=100 50%",
                        data(100, 0.5),
                        cells(
                            Some("2.7 [1.6, 4.6]"),
                            one,
                            "0.99 [0.99, 1]",
                            "0.46 [0.40, 0.55]",
                        ),
                    ),
                    row(
                        "n=1000 10%",
                        data(1000, 0.1),
                        cells(Some("10.5 [10.2, 13.6]"), one, one, "0.69 [0.67, 0.73]"),
                    ),
                    row(
                        "n=1000 25%",
                        data(1000, 0.25),
                        cells(Some("9.8 [9.1, 11.2]"), one, one, "0.78 [0.72, 0.88]"),
                    ),
                    row(
                        "n=1000 50%",
                        data(1000, 0.5),
                        cells(Some("8.4 [8.0, 12.6]"), one, one, "0.69 [0.66, 0.78]"),
                    ),
                ],
            }
        }
        "misspec2" => {
            let data = |n, frac| {
                misspecified(
                    n,
                    frac,
                    Misspecification::StudentTComponents { dof: 3.0 },
                    true,
                )
            };
            CannedTable {
                id: "misspec2",
                title: "Student-t (df 3) components, standardized",
                rows: vec![
                    row(
                        "n=100 25%",
                        data(100, 0.25),
                        cells(
                            Some("4.6 [2.6, 5.2]"),
                            "0.82 [0.72, 0.9]",
                            "1 [0.99, 1]",
                            "0.68 [0.62, 0.78]",
                        ),
                    ),
                    row(
                        "n=100 50%",
                        data(100, 0.5),
                        cells(
                            Some("4.6 [2.4, 5.3]"),
                            "0.96 [0.85, 0.99]",
                            one,
                            "0.74 [0.71, 0.80]",
                        ),
                    ),
                    row(
                        "n=1000 25%",
                        data(1000, 0.25),
                        cells(
                            Some("11.2 [9.1, 13.7]"),
                            "0.92 [0.69, 0.98]",
                            one,
                            "0.59 [0.57, 0.63]",
                        ),
                    ),
                    row(
                        "n=1000 50%",
                        data(1000, 0.5),
                        cells(
                            Some("10.1 [9.3, 15.6]"),
                            "0.88 [0.86, 0.93]",
                            one,
                            "0.58 [0.56, 0.68]",
                        ),
                    ),
                ],
            }
        }
        other => return Err(CliError::UnknownTable(other.to_owned())),
    };
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub repetitions: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Root for per-row artifacts; each row gets its own subdirectory.
    pub output: Option<PathBuf>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            repetitions: 10,
            base_seed: 100,
            workers: 0,
            output: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub setting: String,
    pub published: PublishedRow,
    pub summary: RepetitionSummary,
    pub failed: Vec<FailedRepetition>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub id: &'static str,
    pub title: &'static str,
    pub rows: Vec<ReportRow>,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn reproduce(id: &str, options: &ReproduceOptions) -> Result<Report> {
    let table = canned_table(id)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for canned in table.rows {
        let mut config = canned.config;
        config.repetitions = options.repetitions;
        config.base_seed = options.base_seed;
        config.workers = options.workers;
        config.output = options
            .output
            .as_ref()
            .map(|root| root.join(slug(&canned.setting)));
        let out = run_experiment(&config)?;
        rows.push(ReportRow {
            setting: canned.setting,
            published: canned.published,
            summary: out.summary,
            failed: out.failed,
        });
    }
    Ok(Report {
        id: table.id,
        title: table.title,
        rows,
    })
}

fn cell(q: &Option<Quartiles>, digits: usize) -> String {
    match q {
        Some(q) => format!(
            "{:.d$} [{:.d$}, {:.d$}]",
            q.median,
            q.lower,
            q.upper,
            d = digits
        ),
        None => "n/a".into(),
    }
}

impl Report {
    /// Published and reproduced values side by side, one block per row.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Table {}: {}", self.id, self.title);
        for row in &self.rows {
            let s = &row.summary;
            let _ = writeln!(out, "\n  {}", row.setting);
            let _ = writeln!(
                out,
                "    {:<11} {:<22} {:<22}",
                "", "published", "reproduced"
            );
            let pairs = [
                (
                    "relevant",
                    row.published.relevant.to_owned(),
                    cell(&s.relevant_prop, 2),
                ),
                (
                    "irrelevant",
                    row.published.irrelevant.to_owned(),
                    cell(&s.irrelevant_prop, 2),
                ),
                ("ARI", row.published.ari.to_owned(), cell(&s.ari, 2)),
                (
                    "time (s)",
                    row.published.time.unwrap_or("-").to_owned(),
                    cell(&s.runtime_seconds, 2),
                ),
            ];
            for (name, published, reproduced) in pairs {
                let _ = writeln!(out, "    {name:<11} {published:<22} {reproduced:<22}");
            }
            if s.failures > 0 {
                let _ = writeln!(out, "    {} repetition(s) failed", s.failures);
            }
        }
        out
    }
}
