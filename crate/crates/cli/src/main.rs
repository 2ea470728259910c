use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vbvarsel_cli::config::{RawConfig, RunConfig, KEYS};
use vbvarsel_cli::experiment::{run_experiment, simulate, ExperimentOutput};
use vbvarsel_cli::reproduce::{reproduce, ReproduceOptions, TABLE_IDS};
use vbvarsel_cli::{io, CliError, DataSource, Result};

#[derive(Parser)]
#[command(
    name = "vbvarsel",
    version,
    about = "Annealed variational clustering with covariate selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`, e.g. `--model.k 10`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit once (repetition 0) and print the clustering and selection.
    Fit(ConfigArgs),
    /// Run the repetition harness and write per-repetition artifacts.
    Experiment(ConfigArgs),
    /// Write one synthetic dataset with its truth files.
    Simulate(ConfigArgs),
    /// Regenerate a published simulation table next to the published values.
    Reproduce {
        /// Table id: 1-4, S3-S7, misspec1 or misspec2.
        table: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long, default_value_t = 100)]
        base_seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the per-row experiment artifacts under this directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List every configuration key with its default.
    Keys,
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    raw.apply_flags(&args.overrides)?;
    RunConfig::resolve(&raw)
}

fn print_summary(out: &ExperimentOutput) {
    let s = &out.summary;
    let q = |v: &Option<vbvarsel::eval::Quartiles>| match v {
        Some(q) => format!("{:.3} [{:.3}, {:.3}]", q.median, q.lower, q.upper),
        None => "n/a".into(),
    };
    println!(
        "repetitions completed: {}, failed: {}",
        s.records.len(),
        s.failures
    );
    println!("ARI          {}", q(&s.ari));
    println!("relevant     {}", q(&s.relevant_prop));
    println!("irrelevant   {}", q(&s.irrelevant_prop));
    println!("effective K  {}", q(&s.effective_k));
    println!("runtime (s)  {}", q(&s.runtime_seconds));
    for f in &out.failed {
        eprintln!(
            "repetition {} (seed {}) failed: {}",
            f.repetition, f.seed, f.error
        );
    }
}

fn run_fit(mut config: RunConfig) -> Result<()> {
    config.repetitions = 1;
    let out = run_experiment(&config)?;
    let Some(o) = out.outcomes.first() else {
        let reason = out
            .failed
            .first()
            .map_or_else(String::new, |f| f.error.clone());
        return Err(CliError::Data(format!("fit failed: {reason}")));
    };
    println!(
        "converged: {} after {} iterations, ELBO {:.4}",
        o.fit.converged,
        o.fit.iterations,
        o.fit.final_elbo()
    );
    println!("cluster sizes: {:?}", o.fit.cluster_sizes);
    let chosen: Vec<&str> = o
        .column_names
        .iter()
        .zip(&o.fit.selected)
        .filter(|(_, &s)| s)
        .map(|(n, _)| n.as_str())
        .collect();
    println!(
        "selected {} of {} covariates: {}",
        chosen.len(),
        o.column_names.len(),
        chosen.join(",")
    );
    if let Some(ari) = o.record.ari {
        println!("ARI {ari:.4}");
    }
    if let Some(dir) = &config.output {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}

fn run_simulate(config: RunConfig) -> Result<()> {
    let DataSource::Simulate(sim) = &config.source else {
        return Err(CliError::Config(
            "simulate needs simulate.* keys, not input.path".into(),
        ));
    };
    let dir = config
        .output
        .as_deref()
        .ok_or_else(|| CliError::Config("simulate needs output.dir".into()))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let d = simulate(sim, config.base_seed)?;
    let names: Vec<String> = (0..d.data.j()).map(|j| format!("x{j}")).collect();
    let data = d.data.clone().with_column_names(names.clone())?;
    io::write_matrix(&dir.join("data.csv"), &data)?;
    io::write_assignments(
        &dir.join("truth_labels.csv"),
        d.labels.as_deref().unwrap_or_default(),
    )?;
    io::write_truth_relevant(
        &dir.join("truth_relevant.csv"),
        &names,
        d.relevant.as_deref().unwrap_or_default(),
    )?;
    println!(
        "wrote {} x {} data to {}",
        d.data.n(),
        d.data.j(),
        dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => run_fit(load_config(&args)?),
        Command::Experiment(args) => {
            let config = load_config(&args)?;
            if config.output.is_none() {
                return Err(CliError::Config("experiment needs output.dir".into()));
            }
            let out = run_experiment(&config)?;
            print_summary(&out);
            Ok(())
        }
        Command::Simulate(args) => run_simulate(load_config(&args)?),
        Command::Reproduce {
            table,
            list,
            repetitions,
            base_seed,
            workers,
            output,
        } => {
            if list {
                for id in TABLE_IDS {
                    let t = vbvarsel_cli::canned_table(id)?;
                    println!("{id:<9} {}", t.title);
                }
                return Ok(());
            }
            let table =
                table.ok_or_else(|| CliError::Config("reproduce needs a table id".into()))?;
            let options = ReproduceOptions {
                repetitions,
                base_seed,
                workers,
                output,
            };
            let report = reproduce(&table, &options)?;
            let text = report.render();
            print!("{text}");
            if let Some(dir) = &options.output {
                write_report(dir, &text)?;
            }
            Ok(())
        }
        Command::Keys => {
            for (key, default) in KEYS {
                println!("{key:<32} {}", default.unwrap_or("(unset)"));
            }
            Ok(())
        }
    }
}

fn write_report(dir: &Path, text: &str) -> Result<()> {
    let path = dir.join("report.txt");
    std::fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
