//! Flat `key=value` configuration with dotted keys.
//!
//! A file such as
//!
//! ```text
//! # base scenario, 10% relevant
//! simulate.n=100
//! simulate.relevant_fraction=0.1
//! schedule.kind=geometric
//! schedule.t0=2
//! ```
//!
//! is read into a [`RawConfig`], command-line flags of the same names are
//! layered on top, and [`RunConfig::resolve`] checks and types every value.
//! Unknown keys are configuration errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbvarsel::{
    Correlation, DataMatrix, Hyperparameters, Misspecification, ScheduleKind, TemperatureSchedule,
};

use crate::error::{CliError, Result};
use crate::io::HeaderMode;

/// Every accepted key with its default; `None` marks keys without one.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("input.path", None),
    ("input.header", Some("auto")),
    ("simulate.n", Some("100")),
    ("simulate.covariates", Some("200")),
    ("simulate.relevant_fraction", Some("0.1")),
    ("simulate.correlation", Some("none")),
    ("simulate.noise_sd", Some("0")),
    ("simulate.misspecification", Some("none")),
    ("simulate.permuted_copies", Some("0")),
    ("model.k", Some("3")),
    ("model.alpha0", Some("0.1")),
    ("model.m0", Some("0")),
    ("model.beta0", Some("0.001")),
    ("model.a0", Some("3")),
    ("model.b0", Some("1")),
    ("model.d0", Some("0.9")),
    ("model.c_init", Some("0.5")),
    ("model.max_iterations", Some("200")),
    ("model.epsilon", Some("0.00001")),
    ("model.standardize", Some("true")),
    ("model.selection_warmup", Some("1")),
    ("model.restarts", Some("10")),
    ("schedule.kind", Some("fixed")),
    ("schedule.t0", Some("1")),
    ("schedule.annealed_iterations", Some("5")),
    ("experiment.repetitions", Some("10")),
    ("experiment.base_seed", Some("0")),
    ("experiment.shuffle_covariates", Some("true")),
    ("experiment.workers", Some("0")),
    ("output.dir", None),
    ("truth.labels", None),
    ("truth.relevant", None),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Unvalidated key-value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value, got `{line}`", i + 1))
            })?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    /// Applies `--key value` and `--key=value` arguments.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let flag = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Config(format!("expected a --key flag, got `{arg}`")))?;
            match flag.split_once('=') {
                Some((key, value)) => self.set(key, value)?,
                None => {
                    let value = it
                        .next()
                        .ok_or_else(|| CliError::Config(format!("flag --{flag} needs a value")))?;
                    self.set(flag, value)?;
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    fn value(&self, key: &str) -> Option<&str> {
        self.get(key)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .value(key)
            .ok_or_else(|| CliError::Config(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|e| CliError::Config(format!("{key}: cannot use `{raw}`: {e}")))
    }
}

fn parse_pair(s: &str, key: &str) -> Result<(f64, f64)> {
    let bad = || CliError::Config(format!("{key}: expected lo:hi, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
    ))
}

/// `none`, `fixed:RHO`, `cluster:LO:HI` or `cluster_covariate:LO:HI`.
pub fn parse_correlation(s: &str) -> Result<Correlation> {
    let key = "simulate.correlation";
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "none" => Ok(Correlation::None),
        "fixed" => Ok(Correlation::FixedAll {
            rho: rest
                .parse()
                .map_err(|_| CliError::Config(format!("{key}: bad rho in `{s}`")))?,
        }),
        "cluster" => {
            let (lo, hi) = parse_pair(rest, key)?;
            Ok(Correlation::PerCluster { lo, hi })
        }
        "cluster_covariate" => {
            let (lo, hi) = parse_pair(rest, key)?;
            Ok(Correlation::PerClusterAndCovariate { lo, hi })
        }
        _ => Err(CliError::Config(format!("{key}: unknown variant `{s}`"))),
    }
}

pub fn format_correlation(c: &Correlation) -> String {
    match c {
        Correlation::None => "none".into(),
        Correlation::FixedAll { rho } => format!("fixed:{rho}"),
        Correlation::PerCluster { lo, hi } => format!("cluster:{lo}:{hi}"),
        Correlation::PerClusterAndCovariate { lo, hi } => format!("cluster_covariate:{lo}:{hi}"),
    }
}

/// `none`, `t_noise:DF1,DF2,...` (one per cluster) or `t_components:DF`.
pub fn parse_misspecification(s: &str) -> Result<Misspecification> {
    let bad = || CliError::Config(format!("simulate.misspecification: cannot use `{s}`"));
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "none" => Ok(Misspecification::None),
        "t_noise" => Ok(Misspecification::StudentTNoise {
            dof: rest
                .split(',')
                .map(|d| d.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?,
        }),
        "t_components" => Ok(Misspecification::StudentTComponents {
            dof: rest.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

pub fn format_misspecification(m: &Misspecification) -> String {
    match m {
        Misspecification::None => "none".into(),
        Misspecification::StudentTNoise { dof } => {
            let dof: Vec<String> = dof.iter().map(f64::to_string).collect();
            format!("t_noise:{}", dof.join(","))
        }
        Misspecification::StudentTComponents { dof } => format!("t_components:{dof}"),
    }
}

/// Synthetic data drawn afresh for every repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub covariates: usize,
    pub relevant_fraction: f64,
    pub correlation: Correlation,
    pub noise_sd: f64,
    pub misspecification: Misspecification,
    /// Row-permuted copies of each relevant covariate appended after the
    /// generated block; they are scored as irrelevant.
    pub permuted_copies: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, header: HeaderMode },
    Simulate(SimulationConfig),
}

/// `b0` as a constant, or drawn once per repetition from a uniform range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorScale {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl FromStr for PriorScale {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("uniform:") {
            Some(range) => {
                let (lo, hi) = parse_pair(range, "model.b0")?;
                if !(lo > 0.0 && hi >= lo) {
                    return Err(CliError::Config(format!(
                        "model.b0: need 0 < lo <= hi, got `{s}`"
                    )));
                }
                Ok(Self::Uniform { lo, hi })
            }
            None => s
                .parse()
                .map(Self::Fixed)
                .map_err(|_| CliError::Config(format!("model.b0: cannot use `{s}`"))),
        }
    }
}

impl std::fmt::Display for PriorScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "{v}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

/// `m0` as a constant for every covariate, or the column means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorMean {
    Fixed(f64),
    DataMean,
}

impl FromStr for PriorMean {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "data_mean" {
            return Ok(Self::DataMean);
        }
        s.parse().map(Self::Fixed).map_err(|_| {
            CliError::Config(format!(
                "model.m0: expected a number or data_mean, got `{s}`"
            ))
        })
    }
}

impl std::fmt::Display for PriorMean {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "{v}"),
            Self::DataMean => f.write_str("data_mean"),
        }
    }
}

/// Hyperparameters that do not depend on the covariate count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub k: usize,
    pub alpha0: f64,
    pub m0: PriorMean,
    pub beta0: f64,
    pub a0: f64,
    pub b0: PriorScale,
    pub d0: f64,
    pub c_init: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub standardize: bool,
    pub selection_warmup: usize,
    pub restarts: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let h = Hyperparameters::synthetic(1);
        Self {
            k: h.k_max,
            alpha0: h.alpha0,
            m0: PriorMean::Fixed(h.m0[0]),
            beta0: h.beta0,
            a0: h.a0,
            b0: PriorScale::Fixed(h.b0[0]),
            d0: h.d0,
            c_init: h.c_init,
            max_iterations: h.max_iterations,
            epsilon: h.epsilon,
            standardize: h.standardize,
            selection_warmup: h.selection_warmup,
            restarts: h.restarts,
        }
    }
}

impl ModelConfig {
    /// Concrete hyperparameters for `data`; a uniform `b0` is drawn from
    /// `seed`, so each repetition gets its own value.
    pub fn hyperparameters(&self, data: &DataMatrix, seed: u64) -> Result<Hyperparameters> {
        let b0 = match self.b0 {
            PriorScale::Fixed(v) => v,
            PriorScale::Uniform { lo, hi } => {
                ChaCha8Rng::seed_from_u64(seed ^ 0xb0b0_b0b0).random_range(lo..=hi)
            }
        };
        let hyper = Hyperparameters {
            k_max: self.k,
            alpha0: self.alpha0,
            beta0: self.beta0,
            a0: self.a0,
            d0: self.d0,
            c_init: self.c_init,
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            standardize: self.standardize,
            selection_warmup: self.selection_warmup,
            restarts: self.restarts,
            ..Hyperparameters::synthetic(data.j())
        }
        .with_uniform_b0(b0);
        let hyper = match self.m0 {
            PriorMean::Fixed(v) => Hyperparameters {
                m0: vec![v; data.j()],
                ..hyper
            },
            PriorMean::DataMean => hyper.with_data_mean_prior(data)?,
        };
        hyper.validate(data.j())?;
        Ok(hyper)
    }
}

/// A fully resolved run: data source, model, schedule and harness settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub model: ModelConfig,
    pub schedule: TemperatureSchedule,
    pub repetitions: usize,
    pub base_seed: u64,
    pub shuffle_covariates: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub truth_labels: Option<PathBuf>,
    pub truth_relevant: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults everywhere, on the given data source.
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            model: ModelConfig::default(),
            schedule: TemperatureSchedule::untempered(),
            repetitions: 10,
            base_seed: 0,
            shuffle_covariates: true,
            workers: 0,
            output: None,
            truth_labels: None,
            truth_relevant: None,
        }
    }

    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let simulated = raw.has_prefix("simulate.");
        let source = match (raw.get("input.path"), simulated) {
            (Some(_), true) => {
                return Err(CliError::Config(
                    "give either input.path or simulate.* keys, not both".into(),
                ))
            }
            (None, false) => {
                return Err(CliError::Config(
                    "no data: set input.path or simulate.* keys".into(),
                ))
            }
            (Some(path), false) => DataSource::Csv {
                path: PathBuf::from(path),
                header: raw.parsed("input.header")?,
            },
            (None, true) => DataSource::Simulate(SimulationConfig {
                n: raw.parsed("simulate.n")?,
                covariates: raw.parsed("simulate.covariates")?,
                relevant_fraction: raw.parsed("simulate.relevant_fraction")?,
                correlation: parse_correlation(
                    raw.value("simulate.correlation").unwrap_or("none"),
                )?,
                noise_sd: raw.parsed("simulate.noise_sd")?,
                misspecification: parse_misspecification(
                    raw.value("simulate.misspecification").unwrap_or("none"),
                )?,
                permuted_copies: raw.parsed("simulate.permuted_copies")?,
            }),
        };
        let model = ModelConfig {
            k: raw.parsed("model.k")?,
            alpha0: raw.parsed("model.alpha0")?,
            m0: raw.parsed("model.m0")?,
            beta0: raw.parsed("model.beta0")?,
            a0: raw.parsed("model.a0")?,
            b0: raw.parsed("model.b0")?,
            d0: raw.parsed("model.d0")?,
            c_init: raw.parsed("model.c_init")?,
            max_iterations: raw.parsed("model.max_iterations")?,
            epsilon: raw.parsed("model.epsilon")?,
            standardize: raw.parsed("model.standardize")?,
            selection_warmup: raw.parsed("model.selection_warmup")?,
            restarts: raw.parsed("model.restarts")?,
        };
        let kind: ScheduleKind = raw.parsed("schedule.kind")?;
        let schedule = TemperatureSchedule::new(
            kind,
            raw.parsed("schedule.t0")?,
            raw.parsed("schedule.annealed_iterations")?,
        )?;
        let config = Self {
            source,
            model,
            schedule,
            repetitions: raw.parsed("experiment.repetitions")?,
            base_seed: raw.parsed("experiment.base_seed")?,
            shuffle_covariates: raw.parsed("experiment.shuffle_covariates")?,
            workers: raw.parsed("experiment.workers")?,
            output: raw.get("output.dir").map(PathBuf::from),
            truth_labels: raw.get("truth.labels").map(PathBuf::from),
            truth_relevant: raw.get("truth.relevant").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(CliError::Config(
                "experiment.repetitions must be at least 1".into(),
            ));
        }
        if self.model.restarts < 1 {
            return Err(CliError::Config("model.restarts must be at least 1".into()));
        }
        if let DataSource::Simulate(sim) = &self.source {
            if sim.covariates < 1 || sim.n < 2 {
                return Err(CliError::Config(
                    "simulate.n must be >= 2 and simulate.covariates >= 1".into(),
                ));
            }
        }
        self.schedule.validate()?;
        Ok(())
    }

    /// Every setting that affects results, defaults included, as the
    /// key-value pairs a config file would use. The output directory is
    /// left out so that runs differing only in where they write agree.
    pub fn resolved_pairs(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_owned(), v);
        };
        match &self.source {
            DataSource::Csv { path, header } => {
                put("input.path", path.display().to_string());
                put("input.header", header.to_string());
            }
            DataSource::Simulate(sim) => {
                put("simulate.n", sim.n.to_string());
                put("simulate.covariates", sim.covariates.to_string());
                put(
                    "simulate.relevant_fraction",
                    sim.relevant_fraction.to_string(),
                );
                put("simulate.correlation", format_correlation(&sim.correlation));
                put("simulate.noise_sd", sim.noise_sd.to_string());
                put(
                    "simulate.misspecification",
                    format_misspecification(&sim.misspecification),
                );
                put("simulate.permuted_copies", sim.permuted_copies.to_string());
            }
        }
        let m = &self.model;
        put("model.k", m.k.to_string());
        put("model.alpha0", m.alpha0.to_string());
        put("model.m0", m.m0.to_string());
        put("model.beta0", m.beta0.to_string());
        put("model.a0", m.a0.to_string());
        put("model.b0", m.b0.to_string());
        put("model.d0", m.d0.to_string());
        put("model.c_init", m.c_init.to_string());
        put("model.max_iterations", m.max_iterations.to_string());
        put("model.epsilon", m.epsilon.to_string());
        put("model.standardize", m.standardize.to_string());
        put("model.selection_warmup", m.selection_warmup.to_string());
        put("model.restarts", m.restarts.to_string());
        put("schedule.kind", self.schedule.kind.to_string());
        put("schedule.t0", self.schedule.t0.to_string());
        put(
            "schedule.annealed_iterations",
            self.schedule.annealed_iterations.to_string(),
        );
        put("experiment.repetitions", self.repetitions.to_string());
        put("experiment.base_seed", self.base_seed.to_string());
        put(
            "experiment.shuffle_covariates",
            self.shuffle_covariates.to_string(),
        );
        if let Some(p) = &self.truth_labels {
            put("truth.labels", p.display().to_string());
        }
        if let Some(p) = &self.truth_relevant {
            put("truth.relevant", p.display().to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_unset_keys() {
        let raw = RawConfig::parse("simulate.n=50\n# comment\n\nmodel.k = 10\n").unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.model.k, 10);
        assert_eq!(cfg.repetitions, 10);
        assert!(cfg.shuffle_covariates);
        match cfg.source {
            DataSource::Simulate(sim) => {
                assert_eq!((sim.n, sim.covariates), (50, 200));
                assert_eq!(sim.relevant_fraction, 0.1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            cfg.model,
            ModelConfig {
                k: 10,
                ..ModelConfig::default()
            }
        );
    }

    #[test]
    fn flags_override_the_file() {
        let mut raw = RawConfig::parse("input.path=data.csv\nmodel.alpha0=0.3\n").unwrap();
        let flags: Vec<String> = [
            "--model.alpha0",
            "0.45",
            "--schedule.kind=geometric",
            "--schedule.t0",
            "2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        raw.apply_flags(&flags).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.model.alpha0, 0.45);
        assert_eq!(
            cfg.schedule,
            TemperatureSchedule::geometric(2.0, 5).unwrap()
        );
    }

    #[test]
    fn bad_configs_exit_with_one() {
        let cases = [
            "simulate.n=10\nmodel.nope=1",
            "no equals sign",
            "",
            "input.path=x.csv\nsimulate.n=10",
            "simulate.n=10\nexperiment.repetitions=0",
            "simulate.n=10\nschedule.t0=0.5",
            "simulate.n=10\nmodel.b0=uniform:1",
            "simulate.n=10\nsimulate.correlation=wavy",
        ];
        for text in cases {
            let err = RawConfig::parse(text)
                .and_then(|raw| RunConfig::resolve(&raw))
                .unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }

    #[test]
    fn variant_strings_round_trip() {
        for s in [
            "none",
            "fixed:0.5",
            "cluster:0:0.5",
            "cluster_covariate:0.1:0.4",
        ] {
            assert_eq!(format_correlation(&parse_correlation(s).unwrap()), s);
        }
        for s in ["none", "t_noise:2,3,3", "t_components:3"] {
            assert_eq!(
                format_misspecification(&parse_misspecification(s).unwrap()),
                s
            );
        }
        assert_eq!(
            "uniform:0.01:1".parse::<PriorScale>().unwrap().to_string(),
            "uniform:0.01:1"
        );
        assert_eq!(
            "data_mean".parse::<PriorMean>().unwrap(),
            PriorMean::DataMean
        );
    }

    #[test]
    fn resolved_pairs_reparse_to_the_same_config() {
        let raw = RawConfig::parse(
            "simulate.n=60\nmodel.b0=uniform:0.01:1\nschedule.kind=harmonic\nschedule.t0=3",
        )
        .unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        let mut again = RawConfig::default();
        for (k, v) in cfg.resolved_pairs() {
            again.set(&k, &v).unwrap();
        }
        assert_eq!(RunConfig::resolve(&again).unwrap(), cfg);
    }

    #[test]
    fn uniform_scale_varies_with_seed() {
        let data =
            DataMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let model = ModelConfig {
            b0: PriorScale::Uniform { lo: 0.01, hi: 1.0 },
            ..ModelConfig::default()
        };
        let a = model.hyperparameters(&data, 1).unwrap().b0[0];
        let b = model.hyperparameters(&data, 2).unwrap().b0[0];
        assert!(a != b && (0.01..=1.0).contains(&a) && (0.01..=1.0).contains(&b));
        assert_eq!(model.hyperparameters(&data, 1).unwrap().b0, vec![a, a]);
    }
}
