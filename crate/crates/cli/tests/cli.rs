use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("retrogfn-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn retrogfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retrogfn"))
        .args(args)
        .env("RETROGFN_CONFIG_DIR", repo().join("configs"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    retrogfn(args).status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn gen_corpus_matches_the_bundled_data() {
    let dir = scratch("corpus");
    assert_eq!(code(&["gen-corpus", "--out-dir", &s(&dir)]), 0);
    for f in ["train.txt", "test.txt"] {
        let made = std::fs::read_to_string(dir.join(f)).unwrap();
        let bundled = std::fs::read_to_string(repo().join("data").join(f)).unwrap();
        assert_eq!(made, bundled, "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "gen-corpus");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["version_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn econ_defaults_print_the_table() {
    let dir = scratch("econ");
    let out = retrogfn(&["econ", "--out-dir", &s(&dir)]);
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("econ.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(std::fs::read_to_string(dir.join("income_grid.csv")).unwrap().lines().count() > 1);
    assert!(!out.stdout.is_empty());
}

#[test]
fn fast_selfcheck_passes() {
    let dir = scratch("selfcheck");
    let out = retrogfn(&["selfcheck", "--out-dir", &s(&dir)]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    assert!(dir.join("selfcheck.json").exists());
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let dir = scratch("config");
    let d = s(&dir);
    let bogus = dir.join("bogus.json");
    std::fs::write(&bogus, r#"{"train": {"iterations": 5, "colour": "red"}}"#).unwrap();
    assert_eq!(code(&["train-gfn", "--config", &s(&bogus), "--out-dir", &d]), 2);
    assert_eq!(code(&["train-gfn", "--config", "no-such-config", "--out-dir", &d]), 2);
    assert_eq!(code(&["econ", "--no-such-flag"]), 2);
    let test = s(&repo().join("data/test.txt"));
    assert_eq!(code(&["infer", "--n", "0", "--products", &test, "--out-dir", &d]), 2);
    assert_eq!(code(&["infer", "--n", "101", "--products", &test, "--out-dir", &d]), 2);
}

#[test]
fn missing_inputs_exit_with_code_three() {
    let dir = scratch("data");
    let d = s(&dir);
    let missing = s(&dir.join("absent.txt"));
    assert_eq!(code(&["extract-templates", "--corpus", &missing, "--out-dir", &d]), 3);
    assert_eq!(
        code(&["eval", "--predictions", &missing, "--out-dir", &d]),
        3
    );
    let garbled = dir.join("garbled.txt");
    std::fs::write(&garbled, "this is not a reaction\n").unwrap();
    assert_eq!(code(&["extract-templates", "--corpus", &s(&garbled), "--out-dir", &d]), 3);
}

#[test]
fn extraction_is_reproducible() {
    let (a, b) = (scratch("extract-a"), scratch("extract-b"));
    let train = s(&repo().join("data/train.txt"));
    for dir in [&a, &b] {
        assert_eq!(code(&["extract-templates", "--corpus", &train, "--out-dir", &s(dir)]), 0);
    }
    let read = |d: &Path| std::fs::read_to_string(d.join("library.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("extraction.json")).unwrap()).unwrap();
    assert!(report.is_object());
}
