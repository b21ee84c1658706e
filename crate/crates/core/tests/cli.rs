mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;

use common::fixture_path;
use sqc_core::report::AnalysisReport;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sqc(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_sqc")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn fx(name: &str) -> String {
    fixture_path(name).display().to_string()
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let r = sqc(&full);
    assert_eq!(r.code, 0, "{}", r.stderr);
    serde_json::from_str(&r.stdout).unwrap()
}

fn temp_model(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn bracket(report: &Value, a: &str, b: &str) -> Option<String> {
    report["brackets"]["nonzero"].as_array().unwrap().iter().find_map(|e| {
        (e["a"] == a && e["b"] == b).then(|| e["value"].as_str().unwrap().to_string())
    })
}

#[test]
fn analyze_inductive_counts() {
    let r = json(&["analyze", &fx("inductive.sqc")]);
    assert_eq!(r["constraints"].as_array().unwrap().len(), 5);
    assert_eq!(r["classification"]["first_class"].as_array().unwrap().len(), 1);
    assert_eq!(r["classification"]["second_class"].as_array().unwrap().len(), 4);
    assert_eq!(r["dof"], serde_json::json!({"phase": 2, "config": 1, "fcc": 1, "scc": 4}));
    let mut keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut expected = [
        "model", "constraints", "classification", "dof", "brackets", "reduction", "chart", "hamiltonian", "commutators",
        "dynamics", "warnings",
    ];
    expected.sort_unstable();
    assert_eq!(keys, expected);
}

#[test]
fn reduce_without_gauge_stops_with_warning() {
    let run = sqc(&["reduce", &fx("inductive.sqc"), "--format", "json"]);
    assert_eq!(run.code, 0);
    assert!(run.stderr.contains("1 FCC unfixed"));
    let r: Value = serde_json::from_str(&run.stdout).unwrap();
    assert!(r["warnings"][0].as_str().unwrap().starts_with("1 FCC unfixed"));
    assert_eq!(r["reduction"], Value::Null);
    assert_eq!(r["commutators"], Value::Null);
    assert_eq!(r["brackets"]["stage"], "second class");
}

#[test]
fn reduce_generic_commutators() {
    // lam2 - lam3 = 5/4
    let r = json(&["reduce", &fx("generic.sqc")]);
    let entries = r["commutators"].as_array().unwrap();
    let find = |a: &str, b: &str| entries.iter().find(|e| e["a"] == a && e["b"] == b).unwrap()["value"].clone();
    assert_eq!(find("x1", "x2"), "4/5");
    assert_eq!(find("x1", "x3"), "0");
    assert_eq!(find("Q1", "P1"), "1");
    assert_eq!(find("Q2", "P2"), "1");
    assert_eq!(r["dof"], serde_json::json!({"phase": 4, "config": 2, "fcc": 0, "scc": 4}));
}

#[test]
fn capacitive_brackets_follow_momentum_sign() {
    // p1 = -X1, so x1 and X1 are conjugate up to sign
    let r = json(&["reduce", &fx("capacitive.sqc")]);
    assert_eq!(bracket(&r, "x3", "X2").as_deref(), Some("1"));
    assert_eq!(bracket(&r, "x1", "X1").as_deref(), Some("-1"));
    assert_eq!(r["brackets"]["stage"], "gauge fixed");
    assert_eq!(r["model"]["gauges"][0], "x2 = 0");
}

#[test]
fn empty_constraint_model_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let path = temp_model(dir.path(), "osc.sqc", "var x\nL = (1/2)*d(x)^2 - (1/2)*x^2\n");
    let r = json(&["reduce", &path]);
    assert_eq!(r["constraints"], serde_json::json!([]));
    assert_eq!(r["brackets"]["nonzero"], serde_json::json!([{"a": "x", "b": "p_x", "value": "1"}]));
}

#[test]
fn markdown_quotes_dof_formula() {
    let run = sqc(&["analyze", &fx("inductive.sqc")]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.contains("8 - (2 x 1 + 1 x 4) = 2"));
    let order = ["## Constraints", "## Canonical Hamiltonian", "## Classification", "## Degrees of freedom", "## Dirac brackets"];
    let pos: Vec<usize> = order.iter().map(|h| run.stdout.find(h).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn json_round_trips_and_is_deterministic() {
    for name in ["inductive.sqc", "capacitive.sqc", "noncommutative.sqc", "generic.sqc"] {
        let args = ["reduce", &fx(name), "--format", "json", "--seed", "11"];
        let a = sqc(&args);
        let b = sqc(&args);
        assert_eq!(a.stdout, b.stdout, "{name}");
        let report = AnalysisReport::from_json(&a.stdout).unwrap();
        assert_eq!(report.to_json(), a.stdout);
        assert_eq!(AnalysisReport::from_json(&report.to_json()).unwrap(), report);
        let checks = &report.brackets.checks.unwrap();
        assert!(checks.antisymmetry && checks.bilinearity && checks.constraints_central, "{name}");
    }
}

#[test]
fn simulate_report_round_trips_floats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let run = sqc(&["simulate", &fx("noncommutative.sqc"), "--format", "json", "--trajectory", csv.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = AnalysisReport::from_json(&run.stdout).unwrap();
    assert_eq!(report.to_json(), run.stdout);
    let dy = report.dynamics.unwrap();
    assert_eq!(dy.steps, 10_000);
    assert_eq!(dy.observables[0].initial, dy.observables[0].last);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x1,x2,energy"));
    assert_eq!(text.lines().count(), 10_002);
}

#[test]
fn oracle_flag_adds_comparison() {
    let r = json(&["simulate", &fx("capacitive.sqc"), "--oracle", "1e-3"]);
    let o = &r["dynamics"]["oracle"];
    assert_eq!(o["epsilon"], 1e-3);
    assert!(o["sup_error"].as_f64().unwrap() < 0.05);
}

#[test]
fn gauge_sweep_expressions_and_params() {
    let r = json(&["gauge-sweep", &fx("inductive.sqc"), "--gauges", "x1; x1 + x3; 2*x1 + 3*x3"]);
    let sweep = &r["dynamics"]["gauge_sweep"];
    assert!(sweep["max_deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(sweep["runs"].as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(fixture_path("inductive.sqc")).unwrap();
    let text = base.replacen("param L1", "param a = 1\nparam b = 0\nparam L1", 1) + "gauge a*x1 + b*x3 = 0\n";
    let path = temp_model(dir.path(), "gauged.sqc", &text);
    let r = json(&["gauge-sweep", &path, "--gauges", "1,0;1,1;2,3", "--gauge-params", "a,b", "--observe", "x3 - x1"]);
    let sweep = &r["dynamics"]["gauge_sweep"];
    assert_eq!(sweep["observables"], serde_json::json!(["x3 - x1"]));
    assert!(sweep["max_deviation"].as_f64().unwrap() < 1e-6);
    let runs = sweep["runs"].as_array().unwrap();
    let entry = |run: &Value, a: &str, b: &str| {
        run["nonzero"].as_array().unwrap().iter().find(|e| e["a"] == a && e["b"] == b).map(|e| e["value"].clone())
    };
    assert_eq!(entry(&runs[2], "x1", "P1"), Some("3/5".into()));
    assert_eq!(entry(&runs[2], "x3", "P1"), Some("-2/5".into()));
    assert_eq!(entry(&runs[1], "x3", "P3"), Some("1/2".into()));
}

#[test]
fn golden_comparison_is_semantic() {
    let golden = std::fs::read_to_string(fixture_path("generic.expected.json")).unwrap();
    let mut g: Value = serde_json::from_str(&golden).unwrap();
    // recombine the first two constraints and swap in an independent chart
    let c0 = g["constraints"][0]["form"]["coeffs"].clone();
    let c1 = g["constraints"][1]["form"]["coeffs"].clone();
    let sum: Vec<String> = c0
        .as_array()
        .unwrap()
        .iter()
        .zip(c1.as_array().unwrap())
        .map(|(a, b)| {
            let x: sqc_core::Scalar = a.as_str().unwrap().parse().unwrap();
            let y: sqc_core::Scalar = b.as_str().unwrap().parse().unwrap();
            (x + y).to_string()
        })
        .collect();
    g["constraints"][0]["form"]["coeffs"] = serde_json::json!(sum);
    let form = |c: [&str; 4]| serde_json::json!({"coeffs": c, "constant": "0"});
    let coords = [
        ("Q1", form(["-1", "0", "1", "0"])),
        ("Q2", form(["2/3", "1", "0", "0"])),
        ("P1", form(["0", "0", "0", "1"])),
        ("P2", form(["-2", "0", "3/4", "0"])),
    ];
    g["chart"]["coordinates"] = Value::Array(
        coords.iter().map(|(n, f)| serde_json::json!({"name": n, "text": "", "form": f})).collect(),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = temp_model(dir.path(), "golden.json", &g.to_string());
    let r = json(&["reduce", &fx("generic.sqc"), "--golden", &path]);
    for e in r["comparison"].as_array().unwrap() {
        assert_eq!(e["ok"], true, "{e}");
    }

    g["dof"]["phase"] = serde_json::json!(2);
    g["chart"]["coordinates"][3]["form"] = form(["0", "1", "0", "0"]);
    std::fs::write(&path, g.to_string()).unwrap();
    let r = json(&["reduce", &fx("generic.sqc"), "--golden", &path]);
    let failed: Vec<&str> = r["comparison"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["ok"] == false)
        .map(|e| e["item"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["dof", "chart"]);
}

#[test]
fn shipped_goldens_match() {
    for name in ["inductive", "capacitive", "noncommutative", "generic"] {
        let golden = fx(&format!("{name}.expected.json"));
        let r = json(&["reduce", &fx(&format!("{name}.sqc")), "--golden", &golden]);
        for e in r["comparison"].as_array().unwrap() {
            assert_eq!(e["ok"], true, "{name}: {e}");
        }
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.md");
    let run = sqc(&["analyze", &fx("noncommutative.sqc"), "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.is_empty());
    assert!(std::fs::read_to_string(out).unwrap().starts_with("# Circuit analysis"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let inductive = std::fs::read_to_string(fixture_path("inductive.sqc")).unwrap();
    let cases: Vec<(Vec<String>, i32, &str)> = vec![
        (vec![], 1, "Usage"),
        (vec!["frobnicate".into()], 1, "unrecognized"),
        (vec!["analyze".into(), fx("inductive.sqc"), "--format".into(), "xml".into()], 1, "xml"),
        (vec!["analyze".into(), d.join("missing.sqc").display().to_string()], 1, "cannot read"),
        (vec!["analyze".into(), temp_model(d, "syntax.sqc", "var x\nL = (d(x)\n")], 2, "syntax error at 3:1"),
        (vec!["analyze".into(), temp_model(d, "undeclared.sqc", "var x\nL = d(y)^2\n")], 2, "`y`"),
        (vec!["analyze".into(), temp_model(d, "division.sqc", "var x\nL = 1/x\n")], 2, "division"),
        (vec!["analyze".into(), temp_model(d, "cubic.sqc", "var x\nL = x^3\n")], 2, "x^3"),
        (vec!["analyze".into(), temp_model(d, "inconsistent.sqc", "var x\nL = x\n")], 3, "1 = 0"),
        (
            vec!["analyze".into(), temp_model(d, "nonaffine.sqc", "var x1 x2\nparam w = 1.3 float\nL = (1/2)*d(x1)^2 + cos(w*x2)\n")],
            4,
            "sin(",
        ),
        (vec!["reduce".into(), temp_model(d, "parallel.sqc", &format!("{inductive}gauge P1 + P2 + P3 = 0\n"))], 5, "degenerate"),
        (vec!["reduce".into(), temp_model(d, "twogauges.sqc", &format!("{inductive}gauge x1 = 0\ngauge x3 = 0\n"))], 5, "expected 1"),
        (vec!["simulate".into(), fx("inductive.sqc")], 2, "FCC unfixed"),
        (vec!["simulate".into(), temp_model(d, "nosim.sqc", "var x\nL = (1/2)*d(x)^2\n")], 2, "simulate"),
        (vec!["simulate".into(), fx("capacitive.sqc"), "--oracle=0".into()], 1, "epsilon"),
        (vec!["gauge-sweep".into(), fx("inductive.sqc"), "--gauges".into(), "1,0".into(), "--gauge-params".into(), "a,b".into()], 1, "unknown parameter"),
    ];
    for (args, code, needle) in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let run = sqc(&refs);
        assert_eq!(run.code, code, "{args:?}: {}", run.stderr);
        assert!(run.stderr.contains(needle), "{args:?}: {}", run.stderr);
    }
}
