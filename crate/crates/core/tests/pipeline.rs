use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serp_audit::econometrics::PanelRow;
use serp_audit::experiment::lexicon_run::{build_lexicon, LexiconConfig};
use serp_audit::experiment::report::report;
use serp_audit::experiment::{
    analyze, files, panel_stage, run_experiment, simulate, write_simulation, AnalysisInputs, Experiment,
    GROUP_REGRESSORS, SRIS_OUTCOMES,
};
use serp_audit::rank_similarity::Persistence;
use serp_audit::records::{read_jsonl, write_jsonl};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(name: &str) -> Experiment {
    Experiment::load(&fixture(name)).unwrap()
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serp-audit")).args(args).output().unwrap()
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn persistence() -> Persistence<f64> {
    Persistence::new(0.9).unwrap()
}

#[test]
fn ten_days_of_three_queries_give_4500_records() {
    let mut exp = load("experiment.json");
    exp.config.n_days = 10;
    let sim = simulate(&exp, 1).unwrap();
    assert_eq!(sim.population.users.len(), 150);
    assert_eq!(sim.records.len(), 4500);
}

#[test]
fn missing_fixture_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("experiment.json")).unwrap()).unwrap();
    config["population_config"] = "does-not-exist.json".into();
    let path = tmp.path().join("experiment.json");
    fs::write(&path, config.to_string()).unwrap();
    let out = tmp.path().join("out");
    let result = cli(&["simulate", "--config", path.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(!out.exists());
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert_eq!(stderr.trim().lines().count(), 1);
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(err["error"], "missing_fixture");
    assert!(err["message"].as_str().unwrap().contains("does-not-exist.json"));
}

#[test]
fn usage_errors_are_single_json_lines() {
    let result = cli(&["simulate", "--seed", "x"]);
    assert!(!result.status.success());
    let stderr = String::from_utf8(result.stderr).unwrap();
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn report_names_the_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = load("experiment.json");
    let err = report(tmp.path(), &exp.config.analysis).unwrap_err();
    assert_eq!(err.kind(), "missing_artifact");
    assert!(err.to_string().contains(files::SIMILARITY));

    let err = panel_stage(&exp, tmp.path()).unwrap_err();
    assert!(err.to_string().contains(files::POPULATION));
}

#[test]
fn null_engine_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut exp = load("experiment.json");
    exp.config.n_days = 4;
    run_experiment(&exp, tmp.path(), 3).unwrap();
    let cfg = &exp.config.analysis;

    report(tmp.path(), cfg).unwrap();
    let first = read_tree(tmp.path());
    report(tmp.path(), cfg).unwrap();
    assert_eq!(first, read_tree(tmp.path()));

    let hist = fs::read_to_string(tmp.path().join("report/similarity_hist_organic_jaccard.csv")).unwrap();
    let counts: Vec<usize> = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), cfg.histogram_bins);
    assert!(counts[..counts.len() - 1].iter().all(|&c| c == 0));
    assert!(counts[counts.len() - 1] > 0);

    for name in ["similarity_hist_organic_rbo.svg", "familiarity_organic.svg", "gap_curve_organic.svg", "sris_new.svg"] {
        let svg = fs::read_to_string(tmp.path().join("report").join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join(files::MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["files"][files::SERP_RECORDS].as_str().unwrap().len() == 64);
}

#[test]
fn analysis_does_not_care_where_records_come_from() {
    let tmp = tempfile::tempdir().unwrap();
    let mut exp = load("experiment_personalized.json");
    exp.config.n_days = 5;
    let sim = simulate(&exp, 8).unwrap();
    write_simulation(tmp.path(), &sim).unwrap();

    let external = tmp.path().join("external.jsonl");
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &sim.records).unwrap();
    fs::write(&external, &buf).unwrap();
    let reread = read_jsonl(fs::File::open(&external).unwrap()).unwrap();
    assert_eq!(reread, sim.records);

    let in_memory: Vec<PanelRow> = AnalysisInputs::from_simulation(&sim).panel(persistence()).unwrap();
    let from_files: Vec<PanelRow> = AnalysisInputs::load(tmp.path()).unwrap().panel(persistence()).unwrap();
    assert_eq!(in_memory, from_files);

    let a = analyze(&in_memory, &exp.config.analysis).unwrap();
    let b = analyze(&from_files, &exp.config.analysis).unwrap();
    for outcome in SRIS_OUTCOMES {
        match (a.regression(outcome), b.regression(outcome)) {
            (Some(x), Some(y)) => assert_eq!(x.coef, y.coef),
            (None, None) => {}
            _ => panic!("{outcome} fitted on one source only"),
        }
    }
}

#[test]
fn noiseless_null_engine_shows_no_user_or_city_effects() {
    let mut exp = load("experiment.json");
    exp.config.n_days = 10;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let sim = simulate(&exp, seed).unwrap();
        let panel = AnalysisInputs::from_simulation(&sim).panel(persistence()).unwrap();
        let analysis = analyze(&panel, &exp.config.analysis).unwrap();
        for outcome in SRIS_OUTCOMES {
            if let Some(fit) = analysis.regression(outcome) {
                for term in GROUP_REGRESSORS {
                    let t = fit.t(term).unwrap();
                    if t.is_finite() {
                        worst = worst.max(t.abs());
                    }
                }
            }
        }
    }
    assert!(worst < 3.0, "max |t| = {worst}");
}

#[test]
fn lexicon_runs_from_synthetic_and_file_inputs() {
    for name in ["lexicon.json", "lexicon_files.json"] {
        let (cfg, base) = LexiconConfig::load(&fixture(name)).unwrap();
        let inputs = cfg.inputs(&base, 4).unwrap();
        let out = build_lexicon(&cfg, &inputs).unwrap();
        assert!(out.summary.n_democrat > 0 && out.summary.n_republican > 0, "{name}");
        assert!(out.summary.correlation > 0.5, "{name}: {}", out.summary.correlation);
        assert!(out.terms.iter().all(|t| t.score.abs() <= 1.0));
    }
}

#[test]
fn genpop_cli_writes_population() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pop");
    let result = cli(&[
        "genpop",
        "--config",
        fixture("population.json").to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let users = fs::read_to_string(out.join(files::POPULATION)).unwrap();
    assert_eq!(users.lines().count(), 150);
    assert!(out.join(files::CITIES).exists());
}
