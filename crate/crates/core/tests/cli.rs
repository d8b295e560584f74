use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qfreq::cli::digest_hex;
use serde_json::Value;

fn qfreq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfreq"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const EPI: &str = "[epi]\nepsilon = 0.1\nsamples = 1025\n";

#[test]
fn epi_passes_and_embeds_digest_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "epi.toml", EPI);
    let out = qfreq(&["epi", "--config", "epi.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&tmp.path().join("r"));
    assert_eq!(rep["config_digest"], digest_hex(EPI.as_bytes()));
    assert_eq!(rep["subcommand"], "epi");
    assert_eq!(rep["params"]["epi"]["samples"], 1025);
    assert_eq!(rep["pass"], true);
    assert!(tmp.path().join("r/coefficients.csv").exists());
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "epi.toml", &format!("{EPI}[epi.params]\ndelta_target = 0.9\n"));
    let out = qfreq(&["epi", "--config", "epi.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("r"))["pass"], false);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "[classify1d]\nnodes = 101\n");
    for d in ["a", "b"] {
        let out = qfreq(&["classify1d", "--config", "c.toml", "--out", d, "--seed", "7"], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["report.json", "history.csv", "field.txt"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    assert_eq!(report(&tmp.path().join("a"))["seed"], 7);
}

#[test]
fn flags_override_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "h.toml", "seed = 3\nout = \"from-file\"\n[homogeneous]\nnodes = 65\n");
    let out = qfreq(&["homogeneous", "--config", "h.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&tmp.path().join("from-file"))["seed"], 3);
    let out = qfreq(&["homogeneous", "--config", "h.toml", "--out", "flag", "--seed", "11"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&tmp.path().join("flag"))["seed"], 11);
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qfreq(&["epi", "--config", "absent.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn missing_input_file_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "f.toml", "[source]\nkind = \"file\"\npath = \"no-such-field.txt\"\n");
    let out = qfreq(&["frequency", "--config", "f.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-field.txt"));
}

#[test]
fn invalid_config_is_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    for body in ["[frequency]\nradiii = [0.5]\n", "[solver]\nomega = 3.0\n", "seed = \"x\"\n", "[epi\n"] {
        write(tmp.path(), "bad.toml", body);
        let out = qfreq(&["frequency", "--config", "bad.toml", "--out", "r"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{body}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(qfreq(&["frequency"], tmp.path()).status.code(), Some(2));
    assert_eq!(qfreq(&["nonsense", "--config", "x"], tmp.path()).status.code(), Some(2));
    write(tmp.path(), "w.toml", "subcommand = \"whitney\"\n");
    assert_eq!(qfreq(&["epi", "--config", "w.toml"], tmp.path()).status.code(), Some(2));
}

#[test]
fn frequency_of_a_homogeneous_source() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "f.toml",
        "[source]\nkind = \"homogeneous\"\ndegree = 2\na = [0.6, -0.6]\nnodes = 129\n[frequency]\nexpect = 2.0\n",
    );
    let out = qfreq(&["frequency", "--config", "f.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("r/profile.csv")).unwrap();
    assert!(csv.starts_with("r,D,H,I,W"));
    let i = report(&tmp.path().join("r"))["results"]["median_frequency"].as_f64().unwrap();
    assert!((i - 2.0).abs() < 0.05);
}

#[test]
fn relative_paths_follow_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    let part = qfreq::epiperimetric::format_partition(&qfreq::epiperimetric::model_partition(0.1, 257).unwrap());
    write(&sub, "trace.txt", &part);
    write(&sub, "e.toml", "[epi]\npartition = \"trace.txt\"\n");
    let out = qfreq(&["epi", "--config", "cfg/e.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = qfreq::cli::ExperimentConfig::parse(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg.subcommand.as_deref(), path.file_stem().and_then(|s| s.to_str()));
        n += 1;
    }
    assert_eq!(n, 8);
}
