//! End-to-end acceptance checks: one PASS/FAIL line per criterion, each with its runtime budget.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::linear::Case;
use hybrid_cplus::desugar::expand_abbreviations;
use hybrid_cplus::emit::emit_script;
use hybrid_cplus::emit::sexp::{check_script, Sexp};
use hybrid_cplus::frontend::{parse_description, print_program};
use hybrid_cplus::ground::{build_Dm, complete, CompletedSystem};
use hybrid_cplus::ir::formula::{Formula, Term};
use hybrid_cplus::ir::law::Program;
use hybrid_cplus::ir::plan::Plan;
use hybrid_cplus::ir::sort::GroundConst;
use hybrid_cplus::ir::value::{parse_rat, parse_value, ratio, Number, Rat, Value};
use hybrid_cplus::lraplan::plan;
use hybrid_cplus::odecheck::{integrate, validate_plan, OdeOptions, Verdict, VectorField};
use hybrid_cplus_cli::run;

type Check = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Check, f64);

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../core/tests/corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn corpus_path(name: &str) -> String {
    format!("{}/../core/tests/corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn parse(name: &str) -> Program {
    parse_description(&corpus(name), name).unwrap()
}

fn system(p: &Program, m: u32) -> CompletedSystem {
    complete(&build_Dm(&expand_abbreviations(&p.description).unwrap(), m)).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const TANK: [&str; 10] = ["-c", "w1=7.5", "-c", "w2=7.5", "-c", "v=5", "-c", "r1=0", "-c", "r2=0"];

fn water_tank_reproduction() -> Check {
    let path = corpus_path("water.cp");
    let mut args = vec!["hcplus", "plan", path.as_str(), "-c", "maxstep=6", "-c", "query=test"];
    args.extend(TANK);
    let (mut out, mut err) = (vec![], vec![]);
    let code = run(args, &mut out, &mut err);
    ensure(code == 0, || format!("plan exited {code}: {}", String::from_utf8_lossy(&err)))?;

    let values = TANK.chunks(2).map(|c| c[1].split_once('=').unwrap()).map(|(k, v)| (k.to_string(), parse_value(v))).collect();
    let p = parse("water.cp").substitute_params(&values);
    let res = plan(&system(&p, 6), &p.query(Some("test")).unwrap().constraints).map_err(|e| e.to_string())?;
    let pl = res.plan().ok_or("no plan")?;
    let durations: Vec<Option<Rat>> = pl.steps.iter().map(|s| exact(&s.label.duration()).cloned()).collect();
    let want: Vec<Option<Rat>> = [ratio(8, 5), ratio(0, 1), ratio(4, 5), ratio(0, 1), ratio(2, 5), ratio(0, 1)].map(Some).into();
    ensure(durations == want, || format!("durations {durations:?}"))?;
    let series = |name: &str| -> Vec<Option<Rat>> {
        pl.states().map(|s| s[&GroundConst::plain(name)].as_number().and_then(exact).cloned()).collect()
    };
    let ints = |v: [i64; 7]| -> Vec<Option<Rat>> { v.iter().map(|&n| Some(ratio(n, 1))).collect() };
    ensure(series("x1") == ints([0, 4, 4, 0, 0, 1, 1]), || format!("x1 = {:?}", series("x1")))?;
    ensure(series("x2") == ints([8, 0, 0, 2, 2, 0, 0]), || format!("x2 = {:?}", series("x2")))?;
    Ok("durations 8/5,0,4/5,0,2/5,0; x1 0,4,4,0,0,1,1; x2 8,0,0,2,2,0,0".into())
}

fn plan_of(json: &str) -> Plan {
    Plan::from_json(&serde_json::from_str(json).unwrap()).unwrap()
}

const CAR_PLAN: &str = r#"{"initial": {"x": "0", "y": "0", "theta": "0.6918", "mode": "1"},
 "steps": [
  {"label": "wait", "duration": "8.2505", "post": {"x": "6.3537", "y": "5.2632", "theta": "0.6918", "mode": "1"}},
  {"label": "turnRight", "duration": "0", "post": {"x": "6.3537", "y": "5.2632", "theta": "0.6918", "mode": "3"}},
  {"label": "wait", "duration": "11.8005", "post": {"x": "13", "y": "0", "theta": "-2.0326", "mode": "3"}}]}"#;

const STRAIGHT_PLAN: &str = r#"{"initial": {"x": "0", "y": "0", "theta": "0", "mode": "1"},
 "steps": [{"label": "wait", "duration": "13", "post": {"x": "13", "y": "0", "theta": "0", "mode": "1"}}]}"#;

/// Pillar centres and radii of the car corpus.
const PILLARS: [(f64, f64, f64); 3] = [(9.0, 0.0, 3.0), (5.0, 7.0, 2.0), (12.0, 9.0, 2.0)];

fn car_plan_validation() -> Check {
    let p = parse("car.cp");
    let opts = OdeOptions { h: Some(1e-3), ..OdeOptions::new(0.05) };
    let r = validate_plan(&system(&p, 3), &plan_of(CAR_PLAN), &p.queries[0].constraints, &opts).map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::Valid, || format!("verdict {}\n{r}", r.verdict))?;
    let (_, last) = r.trajectories.iter().find(|(i, _)| *i == 2).ok_or("no trajectory for the turn")?;
    let end: Vec<f64> = last.end.iter().map(Number::to_f64).collect();
    let (dist, heading) = ((end[0] - 13.0).hypot(end[1]), (end[2] + 2.03).abs());
    ensure(dist <= 0.05 && heading <= 0.05, || format!("end {end:?}"))?;
    let mut samples = 0;
    for (_, t) in &r.trajectories {
        for s in &t.states {
            samples += 1;
            for (cx, cy, rad) in PILLARS {
                let d = (s[0] - cx).hypot(s[1] - cy);
                ensure(d > rad, || format!("sample ({}, {}) inside pillar at ({cx}, {cy})", s[0], s[1]))?;
            }
        }
    }
    Ok(format!("end ({:.4}, {:.4}), heading {:.4}, {samples} samples clear of all pillars", end[0], end[1], end[2]))
}

fn infeasible_plan_rejection() -> Check {
    let p = parse("car.cp");
    let r = validate_plan(&system(&p, 1), &plan_of(STRAIGHT_PLAN), &[], &OdeOptions::new(0.05)).map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::Invalid, || format!("verdict {}", r.verdict))?;
    let v = r.violation.ok_or("no violation")?;
    ensure(v.formula.contains("(1:x - 9) * (1:x - 9) + 1:y * 1:y > 9"), || format!("violated {}", v.formula))?;
    let w = v.sample.ok_or("no witness sample")?;
    let (x, y) = (w.state["x"], w.state["y"]);
    ensure((x - 9.0).hypot(y) < 3.0 && y.abs() < 1e-9, || format!("witness ({x}, {y}) outside pillar 1"))?;
    // (8, 0) lies on the same violated segment as the witness
    ensure(x <= 8.0, || format!("witness ({x}, {y}) past (8, 0)"))?;
    Ok(format!("invalid, pillar 1 entered at ({x:.3}, {y:.3}) on the segment through (8, 0)"))
}

fn count(v: &[Sexp], pred: &dyn Fn(&Sexp) -> bool) -> usize {
    v.iter().filter(|s| pred(s)).count()
}

fn smt_emission_structure() -> Check {
    let p = parse("car.cp");
    let script = emit_script(&system(&p, 3), &p.queries[0].constraints).map_err(|e| e.to_string())?.to_string();
    let sum = check_script(&script).map_err(|e| e.to_string())?;
    ensure(sum.logic == "QF_NRA_ODE", || format!("logic {}", sum.logic))?;
    ensure(sum.odes.len() == 3, || format!("{} define-ode blocks", sum.odes.len()))?;
    let integrals = count(&sum.assertions, &|a| {
        a.head() == Some("=>") && a.items().get(2).and_then(|c| c.items().get(2)).and_then(|s| s.head()) == Some("integral")
    });
    ensure(integrals == 3 * 3, || format!("{integrals} integral implications, want 3 steps x 3 modes"))?;
    let always_t = p.description.laws.iter().filter(|l| matches!(l, hybrid_cplus::ir::law::CausalLaw::AlwaysT { .. })).count();
    let foralls = count(&sum.assertions, &|a| a.head() == Some("forall_t"));
    ensure(foralls == always_t * 3, || format!("{foralls} forall_t, want {always_t} laws x 3 steps"))?;
    for n in ["x_0", "x_0_t", "x_1_t", "mode_0", "mode_3"] {
        ensure(sum.declared.contains(n), || format!("`{n}` not declared"))?;
    }
    Ok(format!("3 define-ode, {integrals} integral implications, {foralls} forall_t, renamed symbols declared"))
}

fn linear_property_suite() -> Check {
    let base = common::seed();
    let (mut runs, mut found, mut off_grid) = (0, 0, 0);
    for seed in (0..200).map(|k| base.wrapping_add(k)) {
        let c = Case::new(seed);
        runs += c.check_run(seed)? as usize;
        let (f, grid) = c.check_planner(seed)?;
        found += f as usize;
        off_grid += (f && !grid) as usize;
    }
    Ok(format!("200 automata: {runs} runs accepted, {found} plans replayed, {} unsat agreements, {off_grid} off-grid", 200 - found))
}

fn completion_vs_stable() -> Check {
    let base = common::seed();
    let (mut stable, mut total) = (0, 0);
    for k in 0..100 {
        let (s, t) = common::completion_vs_stable(base.wrapping_add(k), 3)?;
        stable += s;
        total += t;
    }
    Ok(format!("100 descriptions, {total} assignments, {stable} stable models matched"))
}

fn field(names: &[&str], rhs: &[Term]) -> VectorField {
    VectorField { names: names.iter().map(|n| GroundConst::plain(*n)).collect(), rhs: rhs.to_vec() }
}

fn rhs(src: &str) -> Term {
    let p = parse_description(&format!(":- constants\nx,y,theta :: simpleFluent(real[-9..9]).\nconstraint x = {src}.\n"), "f.cp").unwrap();
    match &p.description.laws[0].formulas()[0] {
        Formula::Cmp(_, _, t) => t.clone(),
        f => panic!("{f}"),
    }
}

fn rk4_accuracy() -> Check {
    let n = |s: &str| Number::Exact(parse_rat(s).unwrap());
    let mode = Value::int(1);
    // x' = -y, y' = x and x' = -x/2, y' = y/4
    let rot = field(&["x", "y"], &[rhs("-y"), rhs("x")]);
    let lin = field(&["x", "y"], &[rhs("-x / 2"), rhs("y / 4")]);
    let mut worst: f64 = 0.0;
    for d in [0.5, 1.0, 7.5, 20.0] {
        let t = integrate(&rot, &mode, &[n("1"), n("0")], &Number::Approx(d), 1e-3).map_err(|e| e.to_string())?;
        worst = worst.max((t.end[0].to_f64() - d.cos()).hypot(t.end[1].to_f64() - d.sin()));
        let t = integrate(&lin, &mode, &[n("1"), n("1")], &Number::Approx(d), 1e-3).map_err(|e| e.to_string())?;
        let (ex, ey) = ((-d / 2.0).exp(), (d / 4.0).exp());
        worst = worst.max(((t.end[0].to_f64() - ex) / ex).abs()).max(((t.end[1].to_f64() - ey) / ey).abs());
    }
    ensure(worst <= 1e-10, || format!("linear-field error {worst:e}"))?;

    let w = (-0.226893_f64).tan();
    let arc = field(&["x", "y", "theta"], &[rhs("cos(theta)"), rhs("sin(theta)"), rhs("tan(-0.226893)")]);
    let (th, d) = (0.6918_f64, 11.8005_f64);
    let (mid, half) = (th + w * d / 2.0, w * d / 2.0);
    let exact = [2.0 * mid.cos() * half.sin() / w, 2.0 * mid.sin() * half.sin() / w];
    let err = |h: f64| -> Result<f64, String> {
        let t = integrate(&arc, &Value::int(3), &[n("0"), n("0"), n("0.6918")], &Number::Approx(d), h).map_err(|e| e.to_string())?;
        Ok((t.end[0].to_f64() - exact[0]).hypot(t.end[1].to_f64() - exact[1]))
    };
    let (e1, e2) = (err(1e-2)?, err(5e-3)?);
    ensure(e1 / e2 >= 8.0, || format!("arc errors {e1:e} -> {e2:e}"))?;
    Ok(format!("linear fields within {worst:.1e}; arc error ratio {:.1}", e1 / e2))
}

fn corpus_round_trips() -> Check {
    for name in ["water.cp", "car.cp"] {
        let p = parse(name);
        let printed = print_program(&p);
        let again = parse_description(&printed, name).map_err(|e| format!("{name}: {e}"))?;
        ensure(again == p, || format!("{name}: re-parsed IR differs"))?;
        let b = expand_abbreviations(&p.description).map_err(|e| e.to_string())?;
        let bb = expand_abbreviations(&b.into_description()).map_err(|e| e.to_string())?;
        ensure(bb == b, || format!("{name}: expansion not idempotent"))?;
    }
    Ok("water.cp and car.cp re-parse equal; expansion idempotent".into())
}

fn exact(n: &Number) -> Option<&Rat> {
    match n {
        Number::Exact(r) => Some(r),
        Number::Approx(_) => None,
    }
}

/// Writes past the test harness's output capture so the lines appear in every run.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("water-tank reproduction", water_tank_reproduction, 5.0),
        ("car plan validation", car_plan_validation, 2.0),
        ("infeasible-plan rejection", infeasible_plan_rejection, 2.0),
        ("SMT emission structure", smt_emission_structure, 1.0),
        ("linear-automaton property suite", linear_property_suite, 60.0),
        ("completion vs stable models", completion_vs_stable, 30.0),
        ("RK4 accuracy", rk4_accuracy, 5.0),
        ("corpus round trips", corpus_round_trips, 1.0),
    ];
    let mut failed = vec![];
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|d| {
            if took <= Duration::from_secs_f64(*budget) {
                Ok(d)
            } else {
                Err(format!("took {:.2} s, budget {budget} s", took.as_secs_f64()))
            }
        });
        match result {
            Ok(detail) => report(&format!("PASS {}. {name} ({:.2} s): {detail}", i + 1, took.as_secs_f64())),
            Err(reason) => {
                report(&format!("FAIL {}. {name} ({:.2} s): {reason}", i + 1, took.as_secs_f64()));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
