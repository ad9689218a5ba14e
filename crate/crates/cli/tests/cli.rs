use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pedflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("pedflow runs")
}

fn pedflow_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedflow"))
        .current_dir(dir)
        .env(key, value)
        .args(args)
        .output()
        .expect("pedflow runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed_files(dir: &Path) -> BTreeSet<String> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect()
}

fn present_files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn viscous_nonhyperbolic_pde_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pedflow(tmp.path(), &["run", "pde", "nonhyp-a2", "--eps", "1.5", "--out", "nh"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("nh");
    assert_eq!(listed_files(&dir), present_files(&dir));
    let m = manifest(&dir);
    assert_eq!(m["snapshots"].as_array().unwrap().len(), 5);
    assert_eq!(m["frame"]["cells"], 1280);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("pde_run.json")).unwrap()).unwrap();
    assert_eq!(meta["params"]["eps"], 1.5);
    let first = fs::read_to_string(dir.join("pde_000.csv")).unwrap();
    assert!(first.starts_with("j,x,rho_plus,rho_minus\n0,0.1640625,0.0,0.0\n"));
}

#[test]
fn seeded_ca_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = pedflow(tmp.path(), &["run", "ca", "redlight-a2", "--mc-runs", "1", "--seed", "7", "--out", dir]);
        assert_eq!(code(&out), 0);
    }
    let files = present_files(&tmp.path().join("a"));
    assert!(files.contains("ca_004.csv"));
    for f in files.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &'static str| ["run", "ca", "mixed-a2", "--mc-runs", "12", "--t-end", "20", "--out", dir];
    assert_eq!(code(&pedflow_env(tmp.path(), &args("one"), "PEDFLOW_THREADS", "1")), 0);
    assert_eq!(code(&pedflow_env(tmp.path(), &args("three"), "PEDFLOW_THREADS", "3")), 0);
    let read = |d: &str| fs::read(tmp.path().join(d).join("ca_000.csv")).unwrap();
    assert_eq!(read("one"), read("three"));
    assert_eq!(code(&pedflow_env(tmp.path(), &args("bad"), "PEDFLOW_THREADS", "many")), 2);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pedflow(tmp.path(), &["run", "meso", "unknown-name"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("redlight-a2") && err.contains("nonhyp-a2"), "{err}");
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pedflow(tmp.path(), &["run", "ca", "nowhere.json"])), 4);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "x").unwrap();
    let out = pedflow(tmp.path(), &["run", "pde", "redlight-a2", "--t-end", "1", "--out", "blocker/run"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn numerical_abort_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let listed = pedflow(tmp.path(), &["run", "meso", "redlight-a2", "--t-end", "0", "--out", "probe"]);
    assert_eq!(code(&listed), 0);
    // a forward-Euler step far beyond the stable range
    let mut spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("probe/config.json")).unwrap()).unwrap();
    spec["meso"]["dt"] = serde_json::json!(2.0);
    spec["name"] = serde_json::json!("unstable");
    fs::write(tmp.path().join("unstable.json"), spec.to_string()).unwrap();
    let out = pedflow(tmp.path(), &["run", "meso", "unstable.json", "--t-end", "10", "--out", "u"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("escaped"));
    assert!(!tmp.path().join("u/manifest.json").exists());
}

#[test]
fn scenario_and_ca_config_files() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pedflow(tmp.path(), &["run", "pde", "mixed-a3", "--t-end", "5", "--out", "src"])), 0);
    let cfg = tmp.path().join("src/config.json");
    let out = pedflow(tmp.path(), &["run", "pde", cfg.to_str().unwrap(), "--out", "again"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(tmp.path().join("src/pde_000.csv")).unwrap(),
        fs::read(tmp.path().join("again/pde_000.csv")).unwrap()
    );

    let ca = serde_json::json!({
        "N": 50, "h": 1.0, "dt": 0.1, "t_end": 5.0, "snapshot_times": [1.0, 5.0],
        "mc_runs": 10, "seed": 1,
        "velocities": {"c0": 1.0, "c1": 0.5, "c2": 0.5, "c3": 0.25},
        "init": {"kind": "red_light", "n1": 5, "n2": 10}
    });
    fs::write(tmp.path().join("tiny.json"), ca.to_string()).unwrap();
    assert_eq!(code(&pedflow(tmp.path(), &["run", "ca", "tiny.json", "--out", "tiny"])), 0);
    assert_eq!(manifest(&tmp.path().join("tiny"))["snapshots"].as_array().unwrap().len(), 2);
    assert_eq!(code(&pedflow(tmp.path(), &["run", "meso", "tiny.json", "--out", "tiny-meso"])), 0);
    assert_eq!(code(&pedflow(tmp.path(), &["run", "pde", "tiny.json", "--out", "tiny-pde"])), 2);
    assert_eq!(code(&pedflow(tmp.path(), &["run", "ca", "tiny.json", "--eps", "1", "--out", "x"])), 2);
}

#[test]
fn overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pedflow(
        tmp.path(),
        &["run", "pde", "redlight-a3", "--dx", "1.6", "--snapshots", "5,10", "--t-end", "10", "--eps", "0.2", "--out", "o"],
    );
    assert_eq!(code(&out), 0);
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["frame"]["cells"], 175);
    assert_eq!(m["snapshots"][1]["time"], 10.0);
    assert_eq!(code(&pedflow(tmp.path(), &["run", "pde", "redlight-a3", "--dx", "0.75", "--out", "p"])), 2);
    let out = pedflow(tmp.path(), &["run", "ca", "mixed-a2", "--t-end", "1", "--literal-rates", "--seed", "99", "--mc-runs", "3", "--out", "q"]);
    assert_eq!(code(&out), 0);
    let m = manifest(&tmp.path().join("q"));
    assert_eq!(m["seeds"][0], 99);
    assert_eq!(m["mc_runs"], 3);
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("q/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["ca"]["literal_rates"], true);
}

#[test]
fn rerun_into_same_directory_replaces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["run", "pde", "redlight-a2", "--t-end", "20", "--snapshots", "10,20", "--out", "r"];
    assert_eq!(code(&pedflow(tmp.path(), &args)), 0);
    let args = ["run", "pde", "redlight-a2", "--t-end", "20", "--out", "r"];
    assert_eq!(code(&pedflow(tmp.path(), &args)), 0);
    let dir = tmp.path().join("r");
    assert_eq!(listed_files(&dir), present_files(&dir));
    assert!(!dir.join("pde_001.csv").exists());

    fs::create_dir(tmp.path().join("foreign")).unwrap();
    fs::write(tmp.path().join("foreign/notes.txt"), "keep").unwrap();
    let args = ["run", "pde", "redlight-a2", "--t-end", "1", "--out", "foreign"];
    assert_eq!(code(&pedflow(tmp.path(), &args)), 2);
    assert!(tmp.path().join("foreign/notes.txt").exists());
}

fn report_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compare_pde_with_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["run", "pde", "redlight-a2", "--t-end", "30", "--snapshots", "10,30", "--out", "p"];
    assert_eq!(code(&pedflow(tmp.path(), &args)), 0);
    assert_eq!(code(&pedflow(tmp.path(), &["compare", "p", "p", "--out", "c"])), 0);
    let text = fs::read_to_string(tmp.path().join("c/report.csv")).unwrap();
    assert!(text.starts_with("time,species,l1,linf,tv_ca,tv_pde,min_pde,max_pde\n"));
    let rows = report_rows(&tmp.path().join("c/report.csv"));
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!((r[2].as_str(), r[3].as_str()), ("0.0", "0.0"));
        assert_eq!(r[4], r[5]);
    }
    let dir = tmp.path().join("c");
    assert_eq!(listed_files(&dir), present_files(&dir));
}

#[test]
fn compare_rejects_mismatched_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    assert_eq!(code(&pedflow(t, &["run", "pde", "redlight-a2", "--t-end", "20", "--out", "a"])), 0);
    assert_eq!(code(&pedflow(t, &["run", "pde", "redlight-a2", "--t-end", "10", "--out", "b"])), 0);
    assert_eq!(code(&pedflow(t, &["compare", "a", "b", "--out", "c"])), 2);
    assert_eq!(code(&pedflow(t, &["run", "pde", "mixed-a2", "--t-end", "20", "--out", "m"])), 0);
    assert_eq!(code(&pedflow(t, &["compare", "a", "m", "--out", "d"])), 2);
    assert_eq!(code(&pedflow(t, &["compare", "a", "missing", "--out", "e"])), 4);
}

#[test]
fn compare_ca_against_pde_is_finite() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let common = ["--t-end", "110", "--snapshots", "40,80,110"];
    let ca = [&["run", "ca", "redlight-a2", "--mc-runs", "20", "--out", "ca"], &common[..]].concat();
    let pde = [&["run", "pde", "redlight-a2", "--out", "pde"], &common[..]].concat();
    assert_eq!(code(&pedflow(t, &ca)), 0);
    assert_eq!(code(&pedflow(t, &pde)), 0);
    assert_eq!(code(&pedflow(t, &["compare", "ca", "pde", "--out", "cmp"])), 0);
    let rows = report_rows(&t.join("cmp/report.csv"));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        for v in &r[2..] {
            let x: f64 = v.parse().unwrap();
            assert!(x.is_finite());
        }
        assert!(r[2].parse::<f64>().unwrap() > 0.0);
    }
}

fn read_map(path: &Path) -> Vec<(f64, f64, bool)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2] == "1")
        })
        .collect()
}

#[test]
fn hypmap_regions() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    assert_eq!(code(&pedflow(t, &["hypmap", "--a", "2", "--resolution", "512", "--out", "a2.csv"])), 0);
    assert_eq!(code(&pedflow(t, &["hypmap", "--a", "3", "--resolution", "512", "--out", "maps/a3.csv"])), 0);
    let a2 = read_map(&t.join("a2.csv"));
    let a3 = read_map(&t.join("maps/a3.csv"));
    assert_eq!(a2.len(), 512 * 512);
    let at = |m: &[(f64, f64, bool)], minus: f64, plus: f64| {
        let idx = |x: f64| ((x * 512.0) as usize).min(511);
        m[idx(minus) * 512 + idx(plus)].2
    };
    assert!(at(&a2, 0.6, 0.6) && at(&a3, 0.6, 0.6));
    assert!(!at(&a2, 0.1, 0.1));
    let count = |m: &[(f64, f64, bool)]| m.iter().filter(|r| r.2).count();
    assert!(count(&a3) > count(&a2));

    assert_eq!(code(&pedflow(t, &["hypmap", "--a", "2", "--resolution", "1", "--out", "x.csv"])), 2);
    let explicit = ["hypmap", "--c0", "1", "--c1", "0.5", "--c2", "0.5", "--c3", "0.25", "--resolution", "512", "--out", "e.csv"];
    assert_eq!(code(&pedflow(t, &explicit)), 0);
    assert_eq!(fs::read(t.join("e.csv")).unwrap(), fs::read(t.join("a2.csv")).unwrap());
    let bad = ["hypmap", "--c0", "1", "--c1", "2", "--c2", "0.5", "--c3", "0.25", "--out", "y.csv"];
    assert_eq!(code(&pedflow(t, &bad)), 2);
    assert_eq!(code(&pedflow(t, &["hypmap", "--out", "z.csv"])), 2);
}

#[test]
fn list_scenarios_names_builtins() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pedflow(tmp.path(), &["list-scenarios"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["redlight-a2", "redlight-a3", "mixed-a2", "mixed-a3", "nonhyp-a2"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}
