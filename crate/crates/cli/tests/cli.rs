use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covscreen"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        out.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&path).unwrap(),
        );
    }
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small Model B dataset written under `dir/sim`.
fn simulate(dir: &Path) -> String {
    let out = dir.join("sim");
    let o = run(&[
        "simulate", "--model", "B", "--n", "120", "--p", "300", "--m", "3", "--rho", "0.5",
        "--seed", "7", "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("data.csv").to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_dataset_and_truth_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path());
    let first = snapshot(&tmp.path().join("sim"));
    assert!(first.contains_key("data.csv") && first.contains_key("truth.csv"));
    simulate(tmp.path());
    assert_eq!(first, snapshot(&tmp.path().join("sim")));
    let truth = String::from_utf8(first["truth.csv"].clone()).unwrap();
    assert!(truth.starts_with("index,beta\n1,1\n"));
    assert_eq!(truth.lines().count(), 301);
}

#[test]
fn simulate_without_rho_lists_required_keys() {
    let o = run(&["simulate", "--model", "A", "--n", "100", "--p", "200", "--m", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--rho") && err.contains("--m"), "{err}");
}

#[test]
fn screen_cis_and_sis_agree_on_singleton_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let cis = tmp.path().join("cis");
    let sis = tmp.path().join("sis");
    // a threshold above every sample correlation leaves only singletons
    let o = run(&[
        "screen", "--method", "cis", "--input", &data, "--response", "y", "--delta", "0.99",
        "--out-dir", cis.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["screen", "--method", "sis", "--input", &data, "--out-dir", sis.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ranks = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("stats.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().to_string())
            .collect()
    };
    let header = fs::read_to_string(cis.join("stats.csv")).unwrap();
    assert!(header.starts_with("variable_index_1based,name,method,statistic,rank,block_id\n"));
    assert!(cis.join("partition.csv").exists());
    assert_eq!(ranks(&cis), ranks(&sis));
    assert_eq!(
        fs::read(cis.join("selection.csv")).unwrap(),
        fs::read(sis.join("selection.csv")).unwrap()
    );
}

#[test]
fn screen_rejects_zero_top_k() {
    let o = run(&["screen", "--input", "whatever.csv", "--top-k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--top-k"));
}

#[test]
fn icis_reruns_from_manifest_and_ignores_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let a = tmp.path().join("a");
    let o = run(&[
        "icis", "--input", &data, "--response", "y", "--B", "6", "--n-perm", "2", "--q", "0.1",
        "--seed", "3", "--threads", "1", "--out-dir", a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = snapshot(&a);
    for f in ["frequencies.csv", "fdr.csv", "selection.csv", "manifest.json"] {
        assert!(first.contains_key(f), "{f} missing");
    }
    let b = tmp.path().join("b");
    let manifest = a.join("manifest.json");
    let o = run(&[
        "icis", "--config", manifest.to_str().unwrap(), "--threads", "3", "--out-dir", b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let second = snapshot(&b);
    for f in ["frequencies.csv", "fdr.csv", "selection.csv"] {
        assert_eq!(first[f], second[f], "{f}");
    }
}

#[test]
fn icis_rejects_q_outside_unit_interval() {
    let o = run(&["icis", "--input", "d.csv", "--q", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1.5"));
}

#[test]
fn config_file_keys_are_validated_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("input = \"{data}\"\nmethod = \"sis\"\ntop-k = 5\n")).unwrap();
    let out = tmp.path().join("s");
    let o = run(&[
        "screen", "--config", cfg.to_str().unwrap(), "--top-k", "3", "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sel = fs::read_to_string(out.join("selection.csv")).unwrap();
    assert_eq!(sel.lines().count(), 4);
    assert!(fs::read_to_string(out.join("stats.csv")).unwrap().contains(",sis,"));

    fs::write(&cfg, "inptu = \"x.csv\"\n").unwrap();
    let o = run(&["screen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("inptu") && err.contains("input"), "{err}");
}

#[test]
fn bench_smoke_run_writes_records_and_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    let o = run(&[
        "bench", "--preset", "table1-desk", "--methods", "cis,sis,holp", "--reps", "1",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 4);
    let aggregates = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert!(aggregates.contains("holp,min_model_size,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["invocation"]["command"], "bench");
}

#[test]
fn bench_unknown_preset_lists_presets() {
    let o = run(&["bench", "--preset", "table7"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("table1-desk") && err.contains("table3-full"), "{err}");
}
