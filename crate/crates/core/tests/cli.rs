//! End-to-end behaviour of the `csvm` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csvm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csvm"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = "dataset = synthetic\nsynth_d = 8\nsynth_n_per_class = 80\ntrials = 3\nn_train = 60\nn_test = 60\n";

#[test]
fn validate_reports_all_errors_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "trials = 0\nlambda = -1\nfoo = 3\n");
    let out = csvm(&["validate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("line 1: error: trials must be ≥ 1"), "{text}");
    assert!(text.contains("line 2: error: lambda must be >= 0"), "{text}");
    assert!(text.contains("line 3: error: unknown key 'foo'"), "{text}");
}

#[test]
fn validate_clean_and_span_warning() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_cfg(dir.path(), "ok.cfg", SMALL);
    let out = csvm(&["validate", &ok], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let warn = write_cfg(dir.path(), "warn.cfg", "synth_d = 103\nd_prime = 1\nk = 2\n");
    let out = csvm(&["validate", &warn], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("warning") && text.contains("span"), "{text}");
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "trials = 0\n");
    assert_eq!(csvm(&["validate", &cfg, "--trials", "5"], dir.path()).status.code(), Some(0));
    assert_eq!(csvm(&["validate", &cfg, "--trials=5"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "missing.cfg", "dataset = nowhere.hdr\ntrials = 1\n");
    let out = csvm(&["run", &cfg, "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_config_run_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "trials = 0\n");
    let out = csvm(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 1"));
}

#[test]
fn run_writes_artifacts_and_report_re_renders_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "small.cfg", SMALL);
    let out = csvm(&["run", &cfg, "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("out");
    for f in [
        "resolved.cfg",
        "trials.csv",
        "report.csv",
        "tables.md",
        "histograms/hist_1_2_fca.csv",
        "histograms/hist_1_2_dmd.csv",
        "dumps/pool_1_2_dmd.bin",
        "dumps/classifier_1_2_fca.bin",
    ] {
        assert!(run_dir.join(f).is_file(), "missing {f}");
    }
    let resolved = fs::read_to_string(run_dir.join("resolved.cfg")).unwrap();
    assert!(resolved.contains("k = 8\n"), "auto k resolves to ceil(8/1)");
    assert!(resolved.contains("# pair 1:2 seed = "));

    let out = csvm(&["report", "out/trials.csv", "--output-dir", "again"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for f in ["report.csv", "tables.md", "histograms/hist_1_2_dmd.csv"] {
        assert_eq!(
            fs::read(run_dir.join(f)).unwrap(),
            fs::read(dir.path().join("again").join(f)).unwrap(),
            "{f} differs after re-rendering"
        );
    }
}

#[test]
fn iteration_cap_exits_with_convergence_code_and_keeps_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "capped.cfg", &format!("{SMALL}max_iterations = 2\n"));
    let out = csvm(&["run", &cfg, "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let tables = fs::read_to_string(dir.path().join("out/tables.md")).unwrap();
    assert!(tables.to_lowercase().contains("converge"), "{tables}");
    let trials = fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert!(trials.contains(",false,"));
}

#[test]
fn synth_then_run_from_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = csvm(&["synth", "data/pair.hdr", "--d", "6", "--n-per-class", "70"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let header = fs::read_to_string(dir.path().join("data/pair.hdr")).unwrap();
    assert!(header.contains("d = 6"));
    let before = fs::read(dir.path().join("data/pair.f32")).unwrap();
    let cfg = write_cfg(dir.path(), "h.cfg", "dataset = data/pair.hdr\nd_prime = 2\ntrials = 2\nn_train = 50\nn_test = 50\n");
    let out = csvm(&["run", &cfg, "--output-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.path().join("out/resolved.cfg")).unwrap().contains("k = 3\n"));
    assert_eq!(before, fs::read(dir.path().join("data/pair.f32")).unwrap(), "input mutated");
}

#[test]
fn quick_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = csvm(&["run", "--quick", "--trials", "5", "--output-dir", "q"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("q/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
}
