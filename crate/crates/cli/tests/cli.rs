use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use vbvarsel_cli::{run_experiment, DataSource, RawConfig, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbvarsel"))
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn small_config(extra: &str) -> RunConfig {
    let text = format!(
        "simulate.n=40\nsimulate.covariates=30\nsimulate.relevant_fraction=0.2\n\
         experiment.repetitions=4\nexperiment.base_seed=17\nmodel.restarts=2\n{extra}"
    );
    RunConfig::resolve(&RawConfig::parse(&text).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for shuffle in ["false", "true"] {
        let mut trees = Vec::new();
        for run in 0..2 {
            let mut config = small_config(&format!("experiment.shuffle_covariates={shuffle}"));
            config.output = Some(dir.path().join(format!("{shuffle}_{run}")));
            run_experiment(&config).unwrap();
            trees.push(tree(config.output.as_ref().unwrap()));
        }
        assert_eq!(trees[0].len(), 1 + 4 * 3);
        assert_eq!(trees[0], trees[1]);
    }
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for workers in [1, 3] {
        let mut config = small_config(&format!("experiment.workers={workers}"));
        config.output = Some(dir.path().join(format!("w{workers}")));
        run_experiment(&config).unwrap();
        trees.push(tree(config.output.as_ref().unwrap()));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn different_seeds_give_different_data() {
    let a = run_experiment(&small_config("experiment.repetitions=1")).unwrap();
    let b = run_experiment(&small_config(
        "experiment.repetitions=1\nexperiment.base_seed=18",
    ))
    .unwrap();
    assert_ne!(
        a.outcomes[0].fit.final_elbo(),
        b.outcomes[0].fit.final_elbo()
    );
    assert_eq!(a.outcomes[0].record.seed, 17);
    assert_eq!(b.outcomes[0].record.seed, 18);
}

#[test]
fn summary_records_the_resolved_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config("");
    config.output = Some(dir.path().to_path_buf());
    run_experiment(&config).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["config"]["model.alpha0"], "0.1");
    assert_eq!(json["config"]["simulate.n"], "40");
    assert_eq!(json["config"]["schedule.kind"], "fixed");
    assert_eq!(json["failures"], 0);
    assert_eq!(json["repetitions"].as_array().unwrap().len(), 4);
    assert!(json["aggregates"]["ari"]["median"].is_number());
    assert!(!text.contains("runtime"));

    let mut again = RawConfig::default();
    for (k, v) in json["config"].as_object().unwrap() {
        again.set(k, v.as_str().unwrap()).unwrap();
    }
    let mut reparsed = RunConfig::resolve(&again).unwrap();
    reparsed.output = config.output.clone();
    assert_eq!(reparsed, config);
}

#[test]
fn simulate_then_fit_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let status = bin()
        .args([
            "simulate",
            "--simulate.n",
            "60",
            "--simulate.covariates",
            "20",
        ])
        .args([
            "--simulate.relevant_fraction",
            "0.25",
            "--experiment.base_seed",
            "5",
        ])
        .arg("--output.dir")
        .arg(&sim)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["data.csv", "truth_labels.csv", "truth_relevant.csv"] {
        assert!(sim.join(f).exists(), "{f}");
    }

    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "input.path={}\ntruth.labels={}\ntruth.relevant={}\nexperiment.repetitions=2\nmodel.restarts=3\n",
            sim.join("data.csv").display(),
            sim.join("truth_labels.csv").display(),
            sim.join("truth_relevant.csv").display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .arg("experiment")
        .arg("--config")
        .arg(&cfg)
        .arg("--output.dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let selection = std::fs::read_to_string(out.join("rep_001/selection.csv")).unwrap();
    let lines: Vec<&str> = selection.lines().collect();
    assert_eq!(lines[0], "covariate,c_value,selected");
    assert_eq!(lines.len(), 21);
    for (j, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("x{j},")), "{line}");
    }
    let assignments = std::fs::read_to_string(out.join("rep_000/assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 61);
    let trace = std::fs::read_to_string(out.join("rep_000/elbo_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,temperature,elbo\n0,1,"));
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let code = |cmd: &mut Command| cmd.output().unwrap().status.code().unwrap();

    assert_eq!(
        code(bin().args(["fit", "--model.nope", "1", "--simulate.n", "30"])),
        1
    );
    assert_eq!(
        code(bin().args(["fit", "--simulate.n", "30", "--model.k", "zero"])),
        1
    );
    assert_eq!(
        code(bin().args(["fit", "--simulate.n", "30", "--schedule.t0", "0.5"])),
        1
    );
    assert_eq!(code(bin().args(["experiment", "--simulate.n", "30"])), 1);
    assert_eq!(code(bin().args(["reproduce", "table9"])), 1);
    assert_eq!(code(bin().args(["no-such-command"])), 1);

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
    let nan = dir.path().join("nan.csv");
    std::fs::write(&nan, "a,b\n1,2\n3,NaN\n4,5\n").unwrap();
    for path in [&ragged, &nan, &dir.path().join("missing.csv")] {
        let out = bin()
            .arg("fit")
            .arg("--input.path")
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let ok = dir.path().join("ok.csv");
    let rows: String = (0..12)
        .map(|i| format!("{},{}\n", i % 3, (i * 7) % 5))
        .collect();
    std::fs::write(&ok, format!("a,b\n{rows}")).unwrap();
    let out = bin()
        .arg("fit")
        .arg("--input.path")
        .arg(&ok)
        .args(["--model.restarts", "1"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged"));
}

#[test]
fn keys_and_table_list_print() {
    let out = bin().arg("keys").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("schedule.annealed_iterations") && text.contains("model.restarts"));
    let out = bin().args(["reproduce", "--list"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["1", "S3", "S7", "misspec2"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id}");
    }
}

#[test]
fn csv_source_uses_the_same_data_every_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let rows: String = (0..30)
        .map(|i| {
            let c = [0.0, 3.0, -3.0][i % 3];
            format!(
                "{},{},{}\n",
                c + (i as f64 * 0.37).sin(),
                c + (i as f64 * 0.91).cos(),
                (i as f64 * 1.3).sin()
            )
        })
        .collect();
    std::fs::write(&path, rows).unwrap();
    let mut config = RunConfig::new(DataSource::Csv {
        path,
        header: vbvarsel_cli::HeaderMode::Auto,
    });
    config.repetitions = 3;
    config.model.restarts = 2;
    let out = run_experiment(&config).unwrap();
    assert_eq!(out.outcomes.len(), 3);
    for o in &out.outcomes {
        assert_eq!(o.column_names, ["0", "1", "2"]);
        assert!(o.record.ari.is_none());
    }
}
