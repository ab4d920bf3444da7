use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hypolab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypolab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HYPOLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kronecker_finds_five_seven() {
    let dir = TempDir::new().unwrap();
    let o = hypolab(dir.path(), &["kronecker", "--T", "1", "--Tstar", "1.41421356237", "--eps", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert_eq!((r["result"]["n"].as_u64(), r["result"]["m"].as_u64()), (Some(5), Some(7)));
    assert!((r["result"]["error"].as_f64().unwrap() - 0.0711).abs() < 1e-4);
    assert_eq!(r["verdict"], "pass");
}

#[test]
fn kronecker_exit_codes() {
    let dir = TempDir::new().unwrap();
    let miss = hypolab(
        dir.path(),
        &["kronecker", "--T", "1", "--Tstar", "3.14159265358979", "--eps", "1e-9", "--bound", "10"],
    );
    assert_eq!(code(&miss), 1);
    let rational = hypolab(dir.path(), &["kronecker", "--T", "1", "--Tstar", "1.5", "--eps", "0.1"]);
    assert_eq!(code(&rational), 2);
}

#[test]
fn models_list_names_six() {
    let dir = TempDir::new().unwrap();
    let o = hypolab(dir.path(), &["models", "list"]);
    assert_eq!(code(&o), 0);
    let names: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names, ["hodgkin-huxley", "toy-cascade", "toy-mexicanhat", "spiral", "rotor-chain-1", "rotor-chain-2"]);
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["result"]["models"].as_array().unwrap().len(), 6);
}

#[test]
fn hoermander_verdict_is_not_an_error() {
    let dir = TempDir::new().unwrap();
    let base = ["hoermander", "--model", "hodgkin-huxley", "--point", "rest", "--sigma"];
    let pass = hypolab(dir.path(), &[&base[..], &["const:1"]].concat());
    assert_eq!(code(&pass), 0, "{}", String::from_utf8_lossy(&pass.stderr));
    assert_eq!(json(&dir.path().join("report.json"))["result"]["rank"]["rank"], 5);
    let degenerate = hypolab(dir.path(), &[&base[..], &["const:0"]].concat());
    assert_eq!(code(&degenerate), 1);
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["verdict"], "fail");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn bad_input_exits_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&hypolab(dir.path(), &["kronecker", "--T", "1", "--bogus"])), 2);
    assert_eq!(code(&hypolab(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&hypolab(dir.path(), &["hoermander", "--model", "no-such-model", "--point", "0"])), 2);
    assert_eq!(code(&hypolab(dir.path(), &["hoermander", "--model", "spiral", "--point", "1,2"])), 2);
    assert_eq!(
        code(&hypolab(dir.path(), &["hoermander", "--model", "spiral", "--point", "0,0,0", "--sigma", "cube:1"])),
        2
    );
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn manifest_lists_outputs_and_is_written_last() {
    let dir = TempDir::new().unwrap();
    let o =
        hypolab(dir.path(), &["simulate", "--model", "spiral", "--start", "0,0,0", "--seeds", "3,4", "--horizon", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["seeds"], serde_json::json!([3, 4]));
    assert_eq!(m["parameters"]["dt"], 1e-3);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["report.json", "path_0_3.csv", "path_0_4.csv", "grid_0_3.csv", "grid_0_4.csv"] {
        assert!(outputs.contains(&f), "{f} missing from {outputs:?}");
    }
    for f in &outputs {
        let t = fs::metadata(dir.path().join(f)).unwrap().modified().unwrap();
        assert!(t <= fs::metadata(dir.path().join("manifest.json")).unwrap().modified().unwrap());
    }
    assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn same_config_same_seed_gives_identical_csvs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = [
        "simulate",
        "--model",
        "toy-cascade",
        "--start",
        "0,0,0",
        "--start=-1,2,1",
        "--seed",
        "9",
        "--replicates",
        "3",
        "--horizon",
        "2",
        "--stride",
        "7",
    ];
    assert_eq!(code(&hypolab(a.path(), &args)), 0);
    let threads = Command::new(env!("CARGO_BIN_EXE_hypolab"))
        .arg("--out")
        .arg(b.path())
        .args(args)
        .env("HYPOLAB_THREADS", "1")
        .status()
        .unwrap();
    assert!(threads.success());
    let (ca, cb) = (csvs(a.path()), csvs(b.path()));
    assert_eq!(ca.len(), 12);
    assert_eq!(ca, cb);

    let c = TempDir::new().unwrap();
    let mut other = args.to_vec();
    other[7] = "10";
    assert_eq!(code(&hypolab(c.path(), &other)), 0);
    let cc = csvs(c.path());
    assert_eq!(cc.iter().find(|f| f.0 == "path_0_10.csv"), ca.iter().find(|f| f.0 == "path_0_10.csv"));
    assert_ne!(
        cc.iter().find(|f| f.0 == "path_0_12.csv").unwrap().1,
        ca.iter().find(|f| f.0 == "path_0_9.csv").unwrap().1
    );
}

#[test]
fn missing_seed_is_generated_and_recorded() {
    let dir = TempDir::new().unwrap();
    let o =
        hypolab(dir.path(), &["recurrence", "isi", "--model", "hodgkin-huxley", "--start", "rest", "--horizon", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["seed_generated"], true);
    let seed = m["seeds"][0].as_u64().unwrap();
    assert_eq!(m["parameters"]["seed"].as_u64(), Some(seed));

    let again = TempDir::new().unwrap();
    let s = seed.to_string();
    let o = hypolab(
        again.path(),
        &["recurrence", "isi", "--model", "hodgkin-huxley", "--start", "rest", "--horizon", "50", "--seed", &s],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&again.path().join("manifest.json"))["seed_generated"], false);
    assert_eq!(csvs(dir.path()), csvs(again.path()));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("k.json");
    fs::write(&cfg, r#"{"T": 1, "Tstar": 3.14159265358979, "eps": 0.5, "bound": 100}"#).unwrap();
    let out = dir.path().join("out");
    let cfg_s = cfg.to_str().unwrap();
    let o = hypolab(&out, &["--config", cfg_s, "kronecker", "--eps", "0.01"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["parameters"]["eps"], 0.01);
    assert_eq!(m["parameters"]["bound"], 100);
    assert_eq!(m["config"], cfg_s);
    let r = json(&out.join("report.json"));
    assert_eq!((r["result"]["n"].as_u64(), r["result"]["m"].as_u64()), (Some(7), Some(22)));

    fs::write(&cfg, r#"{"T": 1, "tstar": 2}"#).unwrap();
    assert_eq!(code(&hypolab(&out, &["--config", cfg_s, "kronecker", "--eps", "0.01"])), 2);
}

#[test]
fn certify_and_control_write_data() {
    let dir = TempDir::new().unwrap();
    let plan = [
        "--model",
        "spiral",
        "--start",
        "0.3,-0.5,-0.2",
        "--target-phi",
        "1,0",
        "--target-z",
        "0.4",
        "--delta0",
        "0.5",
    ];
    let o = hypolab(dir.path(), &[&["certify"][..], &plan, &["--n-max", "2000"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert!(r["result"]["certificate"]["best_distance"].as_f64().unwrap() < 1e-2);
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("n,t,x1,y1,z1"));
    assert_eq!(grid.lines().count(), 2002);
    let short = hypolab(dir.path(), &[&["certify"][..], &plan, &["--n-max", "3"]].concat());
    assert_eq!(code(&short), 1);

    let o = hypolab(dir.path(), &[&["control"][..], &plan].concat());
    assert_eq!(code(&o), 0);
    let reference = fs::read_to_string(dir.path().join("reference.csv")).unwrap();
    assert_eq!(reference.lines().next(), Some("t,w1,dw1"));
    assert_eq!(json(&dir.path().join("manifest.json"))["outputs"], serde_json::json!(["reference.csv", "report.json"]));
}

#[test]
fn recurrence_checks_report_verdicts() {
    let dir = TempDir::new().unwrap();
    let o = hypolab(
        dir.path(),
        &[
            "recurrence",
            "hitting",
            "--model",
            "toy-cascade",
            "--start",
            "0,0,0",
            "--target",
            "1,1,0.5",
            "--replicates",
            "10",
            "--n-max",
            "100",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let far = hypolab(
        dir.path(),
        &[
            "recurrence",
            "hitting",
            "--model",
            "toy-cascade",
            "--start",
            "0,0,0",
            "--target",
            "40,40,40",
            "--eps",
            "0.1",
            "--replicates",
            "3",
            "--n-max",
            "5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&far), 1);
    let erg = hypolab(
        dir.path(),
        &[
            "recurrence",
            "ergodic",
            "--model",
            "toy-cascade",
            "--b",
            "(const 0)",
            "--signal",
            r#"{"period": 1, "components": [{"kind": "constant", "value": 1}]}"#,
            "--start-a",
            "0,0,0",
            "--start-b",
            "0,0,1000",
            "--functional",
            "(z 1)",
            "--periods",
            "500",
            "--seed",
            "3",
        ],
    );
    assert_eq!(code(&erg), 1, "{}", String::from_utf8_lossy(&erg.stderr));
}
