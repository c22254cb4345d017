use std::fs;
use std::path::{Path, PathBuf};

use smallbody::cli::config::{read_study, ConfigFile, DerivativeConfig, OperatorStudyConfig, Scenario};
use smallbody::cli::main_with;
use smallbody::fsi::StudyConfig;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(sub: &str, config: Option<&Path>, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["smallbody".to_string(), sub.to_string(), "--quiet".into(), "--out".into()];
    args.push(out.display().to_string());
    if let Some(c) = config {
        args.push("--config".into());
        args.push(c.display().to_string());
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with(args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn summary(out: &Path) -> String {
    fs::read_to_string(out.join("summary.txt")).unwrap()
}

#[test]
fn missing_config_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let code = run("operator-study", Some(&dir.path().join("absent.cfg")), &dir.path().join("o"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_key_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 64\nradius_of_everything = 3\n");
    assert_eq!(run("derivative-check", Some(&cfg), &dir.path().join("o"), &[]), 2);
    assert!(!dir.path().join("o").join("manifest.txt").exists());
}

#[test]
fn bad_flag_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("fsi-run", None, dir.path(), &["--seed", "minus-one"]), 2);
}

#[test]
fn default_operator_study_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run("operator-study", None, &out, &[]), 0, "{}", summary(&out));
    for table in ["uniform_bound.csv", "error_decay.csv", "lemma_b1.csv", "manifest.txt", "summary.txt"] {
        assert!(out.join(table).exists(), "{table}");
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("subcommand=operator-study\nconfig=<defaults>\n"));
    assert!(manifest.contains("seed=0\n"));
}

#[test]
fn ratio_three_is_an_expected_negative() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let text = fs::read_to_string(scenario("operator_study_ratio3.cfg"))
        .unwrap()
        .replace("trials = 50", "trials = 12");
    let cfg = write_config(dir.path(), &text);
    assert_eq!(run("operator-study", Some(&cfg), &out, &[]), 0);
    assert!(summary(&out).contains("lemma_b1.constancy=expected_negative"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "n = 128\nradii = 0.1, 0.0625\nmulti_eps = 0.02, 0.0125\ndecay_eps = 0.125, 0.1, 0.08, 0.0625\ntrials = 2\nseed = 3\n",
    );
    run("operator-study", Some(&cfg), &out, &["--seed", "11"]);
    assert!(fs::read_to_string(out.join("manifest.txt")).unwrap().contains("seed=11\n"));
}

#[test]
fn derivative_check_has_a_column_per_body() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "n = 256\neps = 0.005\ncenters = 0.3913, 0.5127; 0.41, 0.52; 0.45, 0.48\nvelocities = 0.2, 0; 0, 0.1; 0.1, 0.1\n",
    );
    let code = run("derivative-check", Some(&cfg), &out, &[]);
    assert!(code == 0 || code == 1);
    let table = fs::read_to_string(out.join("center_gradient.csv")).unwrap();
    assert!(table.starts_with("axis,residual_body0,residual_body1,residual_body2,flagged\n"));
}

#[test]
fn resting_path_has_zero_time_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), "n = 128\neps = 0.1\nvelocities = 0, 0\n");
    run("derivative-check", Some(&cfg), &out, &[]);
    let table = fs::read_to_string(out.join("time_derivative.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().split(',').nth(2) == Some("0e0"));
}

#[test]
fn fsi_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n = 64\ndt = 0.001\nt_end = 0.05\nrecord_every = 25\nbodies = 0.3, 0.4, 2.0\neps = 0.07\nnoise = 0.2\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("fsi-run", Some(&cfg), &a, &[]), 0, "{}", summary(&a));
    assert_eq!(run("fsi-run", Some(&cfg), &b, &[]), 0);
    for f in ["time_series.csv", "energy.csv", "rigid_velocity.csv", "snapshots/index.csv", "snapshots/u_00002.field"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p.join("manifest.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("timestamp=") && !l.starts_with("out="))
            .map(String::from)
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn time_step_above_bound_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), "n = 32\ndt = 0.005\neps = 0.07\nt_end = 0.05\n");
    assert_eq!(run("fsi-run", Some(&cfg), &out, &[]), 3);
    assert!(summary(&out).contains("aborted="));
}

#[test]
fn shipped_taylor_green_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run("fsi-run", Some(&scenario("taylor_green.cfg")), &out, &[]), 0);
    assert!(summary(&out).contains("taylor_green.decay_rate=pass"));
}

#[test]
fn small_vanishing_study_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "n = 64\nt_end = 0.1\nrecord_every = 10\neps = 0.1, 0.06, 0.04\nbodies = 0.3, 0.4, 0.5\n",
    );
    let code = run("vanishing-study", Some(&cfg), &out, &[]);
    assert!(code == 0 || code == 1);
    let table = fs::read_to_string(out.join("vanishing.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    for f in ["energy_reference.csv", "rigid_velocity.csv", "series_reference.csv", "series_eps0.04.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn every_shipped_config_parses() {
    for entry in fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let mut file = ConfigFile::load(&path).unwrap();
        if name.starts_with("operator") {
            OperatorStudyConfig::read(&mut file).unwrap();
        } else if name.starts_with("derivative") {
            DerivativeConfig::read(&mut file).unwrap();
        } else if name.starts_with("vanishing") {
            read_study(&mut file, StudyConfig::default()).unwrap().validate().unwrap();
        } else {
            Scenario::read(&mut file).unwrap();
        }
        file.finish().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
