use std::io::Write;
use std::process::{Command, Stdio};

use markcfg::{run, Experiment, ExperimentConfig, HarnessError, Preset, ScenarioConfig};

fn small(experiment: Experiment, preset: Preset, seed: u64, n: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment, ScenarioConfig::preset(preset), seed);
    cfg.params.n_samples = n;
    cfg
}

#[test]
fn identical_seeds_give_identical_payloads() {
    let cfg = small(Experiment::SampleStats, Preset::MassTwoCircle, 5, 4_000);
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.payload_json(), b.payload_json());
    assert!(!a.payload_json().contains("wall_clock_seconds"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let text = "version = 1\nexperiment = \"laplace\"\ncolour = 3\n[scenario]\npreset = \"mass-two-circle\"\n";
    let err = ExperimentConfig::from_toml(text).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn wrong_version_is_rejected() {
    let text = "version = 7\nexperiment = \"laplace\"\n[scenario]\npreset = \"mass-two-circle\"\n";
    assert_eq!(ExperimentConfig::from_toml(text).unwrap_err().exit_code(), 2);
}

#[test]
fn preset_and_explicit_fields_are_exclusive() {
    let text = "version = 1\nexperiment = \"laplace\"\n[scenario]\npreset = \"mass-two-circle\"\nrho = { kind = \"constant\", value = 2.0 }\n";
    let err = ExperimentConfig::from_toml(text).and_then(|c| run(&c)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn load_reads_a_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "version = 1\nexperiment = \"semigroup\"\nseed = 9\n[scenario]\npreset = \"ou-circle\"").unwrap();
    let cfg = ExperimentConfig::load(file.path()).unwrap();
    assert_eq!(cfg.experiment, Experiment::Semigroup);
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.params.times, vec![0.0, 0.25, 0.5, 1.0]);
}

#[test]
fn constant_log_two_on_mass_two_targets_e_squared() {
    let mut cfg = small(Experiment::Laplace, Preset::MassTwoCircle, 1, 20_000);
    cfg.params.probes = Some(0);
    cfg.params.constant = Some(std::f64::consts::LN_2);
    let report = run(&cfg).unwrap();
    assert_eq!(report.records.len(), 1);
    let rec = &report.records[0];
    assert!((rec.target - 2f64.exp()).abs() < 1e-12);
    assert!(report.pass, "{rec:?}");
}

#[test]
fn identity_element_has_zero_residual() {
    let mut cfg = small(Experiment::Quasiinvariance, Preset::GammaDilation, 2, 2_000);
    cfg.params.probes = Some(0);
    let report = run(&cfg).unwrap();
    assert_eq!(report.records.len(), 1);
    assert_eq!(report.records[0].estimate, 1.0);
    assert_eq!(report.records[0].std_error, Some(0.0));
}

#[test]
fn sample_stats_pass_on_a_small_run() {
    let report = run(&small(Experiment::SampleStats, Preset::VonMisesCircle, 3, 20_000)).unwrap();
    assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
    assert_eq!(report.records.len(), 3);
}

#[test]
fn every_experiment_round_trips_its_name() {
    for e in Experiment::ALL {
        assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        assert!(!e.identity().is_empty());
    }
    assert!("no-such".parse::<Experiment>().is_err());
}

#[test]
fn cli_lists_experiments_and_reports_config_errors() {
    let bin = env!("CARGO_BIN_EXE_markcfg");
    let out = Command::new(bin).arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    for e in Experiment::ALL {
        assert!(listing.contains(e.name()));
    }

    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "version = 1\nexperiment = \"laplace\"\nbogus = true\n[scenario]\npreset = \"ou-circle\"").unwrap();
    let status = Command::new(bin).args(["run", "--config"]).arg(file.path()).stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_writes_a_passing_report() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "version = 1\nexperiment = \"commutators\"\nseed = 4\n[scenario]\npreset = \"vmf-sphere\"\n[params]\npoints = 20")
        .unwrap();
    let out_path = file.path().with_extension("json");
    let status = Command::new(env!("CARGO_BIN_EXE_markcfg"))
        .args(["run", "--config"])
        .arg(file.path())
        .arg("--out")
        .arg(&out_path)
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(json["experiment"], "commutators");
    assert_eq!(json["pass"], true);
    std::fs::remove_file(out_path).unwrap();
}
