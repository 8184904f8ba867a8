use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mtp-lab"))
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.json"));
    let s: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(name: &str, v: &Value) {
    let errors: Vec<String> = schema(name).iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> (Value, Vec<u8>) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).unwrap(), out.stdout)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dimension_example() {
    let (v, _) = ok_json(&["dimension", "--a", "2", "--t", "2", "--delta", "1", "--kappa", "0"]);
    assert_eq!(v["s"], 0.5);
    assert_eq!(v["argmin_tau"], 4.0);
    assert_valid("dimension", &v);

    let (v, _) = ok_json(&["dimension", "--a", "2", "--t", "2", "--delta", "1", "--exact"]);
    assert_eq!(v["s_exact"], "1/2");
    assert_valid("dimension", &v);
}

#[test]
fn dimension_sequence_with_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let (v, _) = ok_json(&["dimension", "--llvz", "2", "--n-max", "20", "--csv", s(&csv)]);
    assert_valid("dimension", &v);
    let want = ((2f64).ln() + (3f64).ln()) / ((2f64).ln() + 2.0);
    assert!((v["limsup"].as_f64().unwrap() - want).abs() < 1e-9);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,s\n"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn content_of_the_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(dir.path(), "full_unit.json", r#"{"dim":1,"resolution":0,"cubes":[{"level":0,"index":[0]}]}"#);
    let (v, _) = ok_json(&["content", "--set", s(&set), "--f", r#"{"alpha":1,"beta":0}"#, "--depth", "6"]);
    assert_eq!(v["lower"], 1.0);
    assert_eq!(v["upper"], 1.0);
    assert_valid("content", &v);

    let list = write(dir.path(), "cubes.json", r#"[{"level":1,"index":[1,2]}]"#);
    let (v, _) = ok_json(&["content", "--set", s(&list), "--f", r#"{"alpha":2}"#, "--depth", "3"]);
    assert!((v["upper"].as_f64().unwrap() - 1.0 / 16.0).abs() < 1e-12);
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

#[test]
fn errors_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"family_version":1,"kind":"rational","tau":-1,"q_max":4}"#);
    let out = run(&["estimate", "--family", s(&bad), "--depth", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["error"], "precondition");
    assert_valid("error", &e);

    let set = write(dir.path(), "u.json", r#"{"dim":1,"resolution":0,"cubes":[{"level":0,"index":[0]}]}"#);
    let out = run(&["content", "--set", s(&set), "--f", r#"{"alpha":1}"#, "--depth", "20"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["error"], "resource");

    let out = run(&["content", "--set", s(&set), "--f", r#"{"alpha":1}"#, "--depth", "9", "--cell-budget", "4"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["dimension", "--a", "2,3", "--t", "1", "--delta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn family_commands_validate_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let jar = write(dir.path(), "jar.json", r#"{"family_version":1,"kind":"rational","tau":4,"q_max":64}"#);
    let dir_fam = write(dir.path(), "dir.json", r#"{"family_version":1,"kind":"rational","tau":2,"q_max":128}"#);
    let geo = write(
        dir.path(),
        "geo.json",
        r#"{"family_version":1,"kind":"geometric","dim":2,"seed":7,"count":40,"radius":{"kind":"power","c":0.2,"p":0.5}}"#,
    );
    let kappa = write(
        dir.path(),
        "kappa.json",
        r#"{"resonant":[{"lo":[0.0,0.5],"hi":[1.0,0.5]}],"samples":[[0.5,0.5]],"g_exponent":2,
            "eta_grid":[0.03125,0.015625,0.0078125,0.00390625,0.001953125],
            "r_grid":[0.125,0.0625,0.03125,0.015625],"resolution":6}"#,
    );
    let svg = dir.path().join("levels.svg");
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("estimate", vec!["estimate", "--family", s(&jar), "--depth", "10", "--n", "700"]),
        (
            "verify-lip",
            vec!["verify-lip", "--family", s(&dir_fam), "--f", r#"{"alpha":1}"#, "--depth", "8", "--probe-levels", "1,2", "--sweep", "0.5,1"],
        ),
        (
            "simulate",
            vec![
                "simulate", "--family", s(&dir_fam), "--f", r#"{"alpha":0.5}"#, "--g", r#"{"alpha":1}"#, "--depth", "9",
                "--center", "0.5", "--radius", "0.25", "--shrink", "sub_grid:2", "--svg", s(&svg),
            ],
        ),
        ("kappa", vec!["kappa", "--input", s(&kappa)]),
        ("cover", vec!["cover", "--family", s(&geo)]),
        ("cover", vec!["cover", "--family", s(&geo), "--mode", "kgb", "--center", "0.5,0.5", "--radius", "0.5", "--g", "3"]),
    ];
    for (name, args) in cases {
        let (v, first) = ok_json(&args);
        assert_valid(name, &v);
        let (_, second) = ok_json(&args);
        assert_eq!(first, second, "{name} output differs between runs");
        match name {
            "estimate" => {
                let s = v["s"].as_f64().unwrap();
                assert!((0.35..=0.65).contains(&s), "critical exponent {s}");
            }
            "simulate" => {
                assert_eq!(v["P_checks"]["p3"], true);
                assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-9);
            }
            "kappa" => assert!((v["kappa"].as_f64().unwrap() - 0.5).abs() < 0.1),
            _ => {}
        }
    }
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn seed_replaces_geometric_seed() {
    let dir = tempfile::tempdir().unwrap();
    let geo = write(
        dir.path(),
        "geo.json",
        r#"{"family_version":1,"kind":"geometric","dim":1,"seed":7,"count":30,"radius":{"kind":"power","c":0.1,"p":1}}"#,
    );
    let (a, _) = ok_json(&["cover", "--family", s(&geo)]);
    assert_eq!(a["seed"], 7);
    let (b, _) = ok_json(&["cover", "--family", s(&geo), "--seed", "8"]);
    assert_eq!(b["seed"], 8);
    assert_ne!(a["chosen"], b["chosen"]);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["dimension", "--a", "1", "--t", "1", "--delta", "1", "--out", s(&out)]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_valid("dimension", &v);
}
