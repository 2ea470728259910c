//! Repetition harness: fresh seed and covariate order per repetition, fits
//! in parallel, metrics against the truth, flat-file artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use vbvarsel::synthdata::permute_covariates;
use vbvarsel::{
    adjusted_rand_index, aggregate, fit, selection_metrics, DataMatrix, FitResult,
    RepetitionRecord, RepetitionSummary, SyntheticSpec,
};

use crate::config::{DataSource, RunConfig, SimulationConfig};
use crate::error::{CliError, Result};
use crate::io;

/// One dataset with whatever ground truth is known about it.
#[derive(Debug, Clone)]
pub struct LabelledData {
    pub data: DataMatrix,
    pub labels: Option<Vec<usize>>,
    pub relevant: Option<Vec<bool>>,
}

/// Draws the synthetic dataset for one seed, including permuted copies.
pub fn simulate(sim: &SimulationConfig, seed: u64) -> Result<LabelledData> {
    let spec = SyntheticSpec {
        correlation: sim.correlation.clone(),
        noise_sd: sim.noise_sd,
        misspecification: sim.misspecification.clone(),
        ..SyntheticSpec::base(sim.n, sim.covariates, sim.relevant_fraction, seed)
    };
    let ds = spec.generate()?;
    if sim.permuted_copies == 0 {
        return Ok(LabelledData {
            data: ds.data,
            labels: Some(ds.labels),
            relevant: Some(ds.relevant),
        });
    }
    let sources: Vec<usize> = (0..ds.data.j()).filter(|&j| ds.relevant[j]).collect();
    let extra = sources.len() * sim.permuted_copies;
    let j0 = ds.data.j();
    let mut values = Array2::zeros((sim.n, j0 + extra));
    values
        .slice_mut(ndarray::s![.., ..j0])
        .assign(ds.data.values());
    for i in 0..extra {
        values
            .column_mut(j0 + i)
            .assign(&ds.data.column(sources[i % sources.len()]));
    }
    let copies: Vec<usize> = (j0..j0 + extra).collect();
    let data = permute_covariates(&DataMatrix::new(values)?, &copies, seed.wrapping_add(7))?;
    let mut relevant = ds.relevant;
    relevant.resize(j0 + extra, false);
    Ok(LabelledData {
        data,
        labels: Some(ds.labels),
        relevant: Some(relevant),
    })
}

/// Seeded random column order; `order[new] = original`.
pub fn column_order(j: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..j).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c01));
    order
}

/// What one repetition produced. `fit.c` and `fit.selected` are mapped back
/// to the original column order; `fit.final_state` keeps the shuffled order
/// the model was fitted in.
#[derive(Debug, Clone)]
pub struct RepetitionOutcome {
    pub record: RepetitionRecord,
    pub fit: FitResult,
    pub column_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedRepetition {
    pub repetition: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: RepetitionSummary,
    pub outcomes: Vec<RepetitionOutcome>,
    pub failed: Vec<FailedRepetition>,
}

struct Inputs {
    fixed: Option<LabelledData>,
}

fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let DataSource::Csv { path, header } = &config.source else {
        return Ok(Inputs { fixed: None });
    };
    let data = io::load_csv_with(path, *header)?;
    let labels = config
        .truth_labels
        .as_deref()
        .map(io::load_truth_labels)
        .transpose()?;
    let relevant = config
        .truth_relevant
        .as_deref()
        .map(io::load_truth_relevant)
        .transpose()?;
    if labels.as_ref().is_some_and(|l| l.len() != data.n()) {
        return Err(CliError::Data(format!(
            "truth labels have {} entries for {} observations",
            labels.map_or(0, |l| l.len()),
            data.n()
        )));
    }
    if relevant.as_ref().is_some_and(|r| r.len() != data.j()) {
        return Err(CliError::Data(format!(
            "truth relevance has {} entries for {} covariates",
            relevant.map_or(0, |r| r.len()),
            data.j()
        )));
    }
    Ok(Inputs {
        fixed: Some(LabelledData {
            data,
            labels,
            relevant,
        }),
    })
}

fn run_one(config: &RunConfig, inputs: &Inputs, t: usize) -> Result<RepetitionOutcome> {
    let seed = config.base_seed.wrapping_add(t as u64);
    let labelled = match (&inputs.fixed, &config.source) {
        (Some(fixed), _) => fixed.clone(),
        (None, DataSource::Simulate(sim)) => simulate(sim, seed)?,
        (None, DataSource::Csv { .. }) => unreachable!("CSV input is loaded up front"),
    };
    let j = labelled.data.j();
    let order: Vec<usize> = if config.shuffle_covariates {
        column_order(j, seed)
    } else {
        (0..j).collect()
    };
    let data = labelled.data.select_columns(&order)?;
    let hyper = config.model.hyperparameters(&data, seed)?;

    let start = Instant::now();
    let mut result = fit(&data, &hyper, &config.schedule, seed)?;
    let runtime_seconds = start.elapsed().as_secs_f64();

    let mut c = vec![0.0; j];
    let mut selected = vec![false; j];
    for (new, &orig) in order.iter().enumerate() {
        c[orig] = result.c[new];
        selected[orig] = result.selected[new];
    }
    result.c = c;
    result.selected = selected;

    let ari = labelled
        .labels
        .as_deref()
        .map(|truth| adjusted_rand_index(&result.labels, truth))
        .transpose()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let props = labelled
        .relevant
        .as_deref()
        .map(|truth| selection_metrics(&result.selected, truth))
        .transpose()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let record = RepetitionRecord {
        repetition: t,
        seed,
        ari,
        relevant_prop: props.map(|p| p.0),
        irrelevant_prop: props.map(|p| p.1),
        runtime_seconds,
        effective_k: result.effective_k,
        iterations: result.iterations,
        converged: result.converged,
        final_elbo: result.final_elbo(),
    };
    let column_names = (0..j).map(|c| labelled.data.column_label(c)).collect();
    Ok(RepetitionOutcome {
        record,
        fit: result,
        column_names,
    })
}

pub fn repetition_dir(root: &Path, t: usize) -> PathBuf {
    root.join(format!("rep_{t:03}"))
}

fn write_repetition(root: &Path, outcome: &RepetitionOutcome) -> Result<()> {
    let dir = repetition_dir(root, outcome.record.repetition);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    io::write_assignments(&dir.join("assignments.csv"), &outcome.fit.labels)?;
    io::write_selection(
        &dir.join("selection.csv"),
        &outcome.column_names,
        &outcome.fit.c,
        &outcome.fit.selected,
    )?;
    io::write_elbo_trace(&dir.join("elbo_trace.csv"), &outcome.fit)
}

/// Runs every repetition, writes artifacts when an output directory is set,
/// and aggregates the completed ones. A failing repetition is recorded and
/// left out of the aggregates; it never stops the others.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    if let Some(root) = &config.output {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    }
    let work = || -> Vec<Result<RepetitionOutcome, FailedRepetition>> {
        (0..config.repetitions)
            .into_par_iter()
            .map(|t| {
                let outcome = run_one(config, &inputs, t).and_then(|o| {
                    if let Some(root) = &config.output {
                        write_repetition(root, &o)?;
                    }
                    Ok(o)
                });
                outcome.map_err(|e| FailedRepetition {
                    repetition: t,
                    seed: config.base_seed.wrapping_add(t as u64),
                    error: e.to_string(),
                })
            })
            .collect()
    };
    let results = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| CliError::Config(format!("experiment.workers: {e}")))?
            .install(work)
    } else {
        work()
    };

    let mut outcomes = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failed.push(f),
        }
    }
    let summary = aggregate(
        outcomes.iter().map(|o| o.record.clone()).collect(),
        failed.len(),
    );
    let output = ExperimentOutput {
        summary,
        outcomes,
        failed,
    };
    if let Some(root) = &config.output {
        let path = root.join("summary.json");
        let text = serde_json::to_string_pretty(&summary_json(config, &output))
            .map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    }
    Ok(output)
}

fn strip_runtime(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("runtime_seconds");
            map.values_mut().for_each(strip_runtime);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

/// The summary file. Wall-clock times are left out so that the file depends
/// only on the configuration and seed.
pub fn summary_json(config: &RunConfig, output: &ExperimentOutput) -> Value {
    let mut summary = serde_json::to_value(&output.summary).unwrap_or(Value::Null);
    strip_runtime(&mut summary);
    let failed: Vec<Value> = output
        .failed
        .iter()
        .map(|f| json!({"repetition": f.repetition, "seed": f.seed, "error": f.error}))
        .collect();
    json!({
        "config": config.resolved_pairs(),
        "repetitions": summary["records"],
        "aggregates": {
            "ari": summary["ari"],
            "relevant_prop": summary["relevant_prop"],
            "irrelevant_prop": summary["irrelevant_prop"],
            "effective_k": summary["effective_k"],
        },
        "failures": output.failed.len(),
        "failed_repetitions": failed,
    })
}
