use std::collections::BTreeMap;
use std::process::Command;

use hybrid_cplus::desugar::expand_abbreviations;
use hybrid_cplus::emit::sexp::check_script;
use hybrid_cplus::frontend::{parse_description, parse_ha};
use hybrid_cplus::ir::value::{ratio, Value};
use hybrid_cplus::translate::{translate, TranslationOptions};
use hybrid_cplus_cli::run;
use proptest::prelude::*;

fn corpus(name: &str) -> String {
    format!("{}/../core/tests/corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn hcplus(args: &[&str]) -> Out {
    let (mut out, mut err) = (vec![], vec![]);
    let argv = std::iter::once("hcplus").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

const TANK: [&str; 10] = ["-c", "w1=7.5", "-c", "w2=7.5", "-c", "v=5", "-c", "r1=0", "-c", "r2=0"];

fn water(cmd: &str, extra: &[&str]) -> Out {
    let path = corpus("water.cp");
    let mut args = vec![cmd, path.as_str(), "-c", "maxstep=6", "-c", "query=test"];
    args.extend(TANK);
    args.extend(extra);
    hcplus(&args)
}

const CAR_PLAN: &str = r#"{"initial": {"x": "0", "y": "0", "theta": "0.6918", "mode": "1"},
 "steps": [
  {"label": "wait", "duration": "8.2505", "post": {"x": "6.3537", "y": "5.2632", "theta": "0.6918", "mode": "1"}},
  {"label": "turnRight", "duration": "0", "post": {"x": "6.3537", "y": "5.2632", "theta": "0.6918", "mode": "3"}},
  {"label": "wait", "duration": "11.8005", "post": {"x": "13", "y": "0", "theta": "-2.0326", "mode": "3"}}]}"#;

const STRAIGHT_PLAN: &str = r#"{"initial": {"x": "0", "y": "0", "theta": "0", "mode": "1"},
 "steps": [{"label": "wait", "duration": "13", "post": {"x": "13", "y": "0", "theta": "0", "mode": "1"}}]}"#;

#[test]
fn water_plan_table() {
    let o = water("plan", &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows: Vec<Vec<&str>> = o.stdout.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    let durations: Vec<&str> = rows.iter().skip(1).map(|r| r[2]).collect();
    assert_eq!(durations, ["8/5", "0", "4/5", "0", "2/5", "0"]);
    let x1: Vec<&str> = rows.iter().map(|r| r[r.len() - 2]).collect();
    let x2: Vec<&str> = rows.iter().map(|r| r[r.len() - 1]).collect();
    assert_eq!(x1, ["0", "4", "4", "0", "0", "1", "1"]);
    assert_eq!(x2, ["8", "0", "0", "2", "2", "0", "0"]);
    assert!(o.stderr.contains("candidates: 8"));
}

#[test]
fn planned_water_plan_validates() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let plan = plan.to_str().unwrap();
    assert_eq!(water("plan", &["--plan-json", plan]).code, 0);
    let o = water("validate", &["--plan", plan, "--delta", "0"]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.starts_with("verdict: valid"));
    // the automaton itself accepts the plan too
    let ha = corpus("water_tank.json");
    let mut args = vec!["validate", ha.as_str(), "--plan", plan, "--delta", "0"];
    args.extend(TANK);
    let o = hcplus(&args);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
}

#[test]
fn automaton_input_plans() {
    let ha = corpus("water_tank.json");
    let mut args = vec!["plan", ha.as_str()];
    args.extend(TANK);
    let o = hcplus(&args);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("8/5 (1.6)"));
}

#[test]
fn car_emit_structure() {
    let o = hcplus(&["emit", &corpus("car.cp"), "-c", "maxstep=3", "-c", "query=test"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let summary = check_script(&o.stdout).unwrap();
    assert_eq!(summary.odes.len(), 3);
    assert!(o.stdout.contains("(set-logic QF_NRA_ODE)"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("car.smt2");
    let o = hcplus(&["emit", &corpus("car.cp"), "-c", "maxstep=3", "-o", path.to_str().unwrap()]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.is_empty());
    assert_eq!(check_script(&std::fs::read_to_string(path).unwrap()).unwrap().odes.len(), 3);
}

#[test]
fn car_plan_validates_and_straight_line_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (car, straight, trace) = (dir.path().join("car.json"), dir.path().join("s.json"), dir.path().join("t.csv"));
    std::fs::write(&car, CAR_PLAN).unwrap();
    std::fs::write(&straight, STRAIGHT_PLAN).unwrap();
    let o = hcplus(&["validate", &corpus("car.cp"), "--plan", car.to_str().unwrap(), "--delta", "0.05", "--h", "1e-3"]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);

    let o = hcplus(&[
        "validate",
        &corpus("car.cp"),
        "--plan",
        straight.to_str().unwrap(),
        "--delta",
        "0.05",
        "--ignore-query",
        "--json",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 1, "{}{}", o.stdout, o.stderr);
    let report: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["verdict"], "invalid");
    assert!(report["violation"]["formula"].as_str().unwrap().contains("always_t"));
    let csv = std::fs::read_to_string(trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,mode,t,x,y,theta"));
    assert!(lines.count() > 100);
}

#[test]
fn unsat_query_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.cp");
    let text = std::fs::read_to_string(corpus("water.cp")).unwrap()
        + "\n:- query\nlabel :: far;\nmaxstep :: 2;\n0:mode=1;\n0:x1=0;\n0:x2=8;\n2:x1 = 20.\n";
    std::fs::write(&path, text).unwrap();
    let mut args = vec!["plan", path.to_str().unwrap(), "-c", "query=far"];
    args.extend(TANK);
    let o = hcplus(&args);
    assert_eq!(o.code, 1, "{}", o.stderr);
    assert_eq!(o.stdout, "unsat\n");
}

#[test]
fn usage_errors_exit_two() {
    let o = hcplus(&["plan", "nonexistent.cp"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("nonexistent.cp"));

    let o = water("plan", &["-c", "gravity=9.8"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("unknown constant `gravity`"));
    assert!(o.stderr.contains("r1, r2, v, w1, w2"), "{}", o.stderr);

    let o = hcplus(&["plan", &corpus("water.cp"), "-c", "maxstep=6"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("no value for symbolic constants"));

    for bad in [&["-c", "w1"][..], &["-c", "maxstep=-1"], &["-c", "query=nope"], &["-c", "w1=7.5.1"]] {
        let o = water("plan", bad);
        assert_eq!(o.code, 2, "{bad:?}: {}", o.stderr);
    }
    assert_eq!(hcplus(&["frobnicate"]).code, 2);
    assert_eq!(hcplus(&["dump", "nothing", &corpus("water.cp")]).code, 2);

    let o = hcplus(&["plan", &corpus("car.cp"), "-c", "maxstep=3"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("validate"), "{}", o.stderr);
}

#[test]
fn help_exits_zero() {
    let o = hcplus(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("validate"));
}

#[test]
fn dumps() {
    for kind in ["cplus", "basic", "aspmt", "completion"] {
        let path = corpus("water.cp");
        let mut args = vec!["dump", kind, path.as_str(), "-c", "maxstep=1"];
        args.extend(TANK);
        let o = hcplus(&args);
        assert_eq!(o.code, 0, "{kind}: {}", o.stderr);
        assert!(!o.stdout.is_empty());
    }
    let o = hcplus(&["dump", "completion", &corpus("car.cp"), "-c", "maxstep=1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("integral"), "{}", o.stdout);
}

#[test]
fn cplus_dump_round_trips() {
    for file in ["water.cp", "car.cp", "water_tank.json", "car.json"] {
        let o = hcplus(&["dump", "cplus", &corpus(file)]);
        assert_eq!(o.code, 0, "{file}: {}", o.stderr);
        let once = parse_description(&o.stdout, "dump.cp").unwrap_or_else(|e| panic!("{file}: {e}\n{}", o.stdout));
        let dir = tempfile::tempdir().unwrap();
        let again = dir.path().join("again.cp");
        std::fs::write(&again, &o.stdout).unwrap();
        let o2 = hcplus(&["dump", "cplus", again.to_str().unwrap()]);
        assert_eq!(o2.code, 0);
        assert_eq!(parse_description(&o2.stdout, "dump.cp").unwrap(), once, "{file}");
        assert_eq!(o2.stdout, o.stdout, "{file}");
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hcplus");
    let st = Command::new(bin).args(["plan", "nonexistent.cp"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = Command::new(bin)
        .args(["plan", &corpus("water.cp"), "-c", "maxstep=6", "-c", "query=test"])
        .args(TANK)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("8/5 (1.6)"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn substitution_commutes_with_desugaring(vals in proptest::collection::vec((-40i64..40, 1i64..8), 5)) {
        let cp = parse_description(&std::fs::read_to_string(corpus("water.cp")).unwrap(), "water.cp").unwrap();
        let ha = parse_ha(&std::fs::read_to_string(corpus("water_tank.json")).unwrap(), "water_tank.json").unwrap();
        let translated = translate(&ha, &TranslationOptions::default()).unwrap();
        let values: BTreeMap<String, Value> = ["r1", "r2", "v", "w1", "w2"]
            .iter()
            .zip(&vals)
            .map(|(k, (n, d))| (k.to_string(), Value::Num(ratio(*n, *d))))
            .collect();
        for p in [cp, translated] {
            let a = expand_abbreviations(&p.description.substitute_params(&values)).unwrap();
            let b = expand_abbreviations(&p.description).unwrap().substitute_params(&values);
            prop_assert_eq!(a, b);
        }
    }
}
