use std::collections::BTreeMap;

use hybrid_cplus::desugar::expand_abbreviations;
use hybrid_cplus::frontend::{parse_description, parse_ha};
use hybrid_cplus::ground::{build_Dm, complete, CompletedSystem};
use hybrid_cplus::ir::formula::{Formula, Rel, Term};
use hybrid_cplus::ir::law::Program;
use hybrid_cplus::ir::plan::{Label, Plan};
use hybrid_cplus::ir::sort::GroundConst;
use hybrid_cplus::ir::value::{parse_rat, parse_value, rat, Number, Rat, Val, Value};
use hybrid_cplus::lraplan::{plan, plan_table, Outcome, PlanError, Planner};
use hybrid_cplus::translate::{translate, TranslationOptions, Variant};

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn system(p: &Program, m: u32) -> CompletedSystem {
    complete(&build_Dm(&expand_abbreviations(&p.description).unwrap(), m)).unwrap()
}

fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), parse_value(v))).collect()
}

const TANK: &[(&str, &str)] = &[("w1", "7.5"), ("w2", "7.5"), ("v", "5"), ("r1", "0"), ("r2", "0")];

fn ha_program(src: &str, variant: Variant) -> Program {
    let h = parse_ha(src, "t.json").unwrap();
    translate(&h, &TranslationOptions { variant, ..TranslationOptions::default() }).unwrap()
}

/// `step:name rel value` conjunctions.
fn q(atoms: &[(u32, &str, Rel, i64)]) -> Formula {
    Formula::and(atoms.iter().map(|(i, n, r, v)| Formula::cmp(Term::stamped(*n, *i), *r, Term::int(*v))).collect())
}

fn r(s: &str) -> Rat {
    parse_rat(s).unwrap()
}

fn exact(n: &Number) -> Rat {
    match n {
        Number::Exact(r) => r.clone(),
        Number::Approx(x) => panic!("approximate {x}"),
    }
}

fn series(p: &Plan, name: &str) -> Vec<Rat> {
    p.states()
        .map(|s| match &s[&GroundConst::plain(name)] {
            Val::Num(n) => exact(n),
            v => panic!("{v}"),
        })
        .collect()
}

fn labels(p: &Plan) -> Vec<String> {
    p.steps
        .iter()
        .map(|s| match &s.label {
            Label::Event(e) => e.clone(),
            Label::Wait(_) => "wait".into(),
        })
        .collect()
}

fn check_tank_plan(p: &Plan) {
    assert_eq!(labels(p), ["wait", "e1", "wait", "e2", "wait", "e1"]);
    let d: Vec<Rat> = p.steps.iter().map(|s| exact(&s.label.duration())).collect();
    assert_eq!(d, ["8/5", "0", "4/5", "0", "2/5", "0"].map(r));
    assert_eq!(series(p, "x1"), ["0", "4", "4", "0", "0", "1", "1"].map(r));
    assert_eq!(series(p, "x2"), ["8", "0", "0", "2", "2", "0", "0"].map(r));
}

#[test]
fn water_tank_exact_plan() {
    let p = ha_program(&corpus("water_tank.json"), Variant::Linear).substitute_params(&params(TANK));
    let cs = system(&p, 6);
    let res = plan(&cs, &p.queries[0].constraints).unwrap();
    check_tank_plan(res.plan().expect("feasible"));
    assert_eq!(res.stats.candidates, 8);
    assert!(res.stats.solver_calls >= 1);
}

#[test]
fn water_tank_description_plan() {
    let p = parse_description(&corpus("water.cp"), "water.cp").unwrap().substitute_params(&params(TANK));
    let cs = system(&p, 6);
    let res = plan(&cs, &p.queries[0].constraints).unwrap();
    check_tank_plan(res.plan().expect("feasible"));
    let table = plan_table(res.plan().unwrap());
    assert!(table.lines().nth(2).unwrap().contains("8/5 (1.6)"), "{table}");
}

const TWO_EDGES: &str = r#"{"variables": ["x"], "modes": [1, 2, 3],
    "switches": [{"from": 1, "to": 2, "hevent": "e1", "guard": "x >= 0"},
                 {"from": 1, "to": 3, "hevent": "e2", "guard": "x >= 0"}],
    "init": {"1": "x = 0"},
    "flow": {"linear": {"1": "x' = 1", "2": "x' = 0", "3": "x' = 0"}}}"#;

#[test]
fn horizon_zero_has_only_the_empty_sequence() {
    let p = ha_program(TWO_EDGES, Variant::Linear);
    let cs = system(&p, 0);
    let pl = Planner::new(&cs, &p.queries[0].constraints).unwrap();
    let cands = pl.candidates();
    assert_eq!(cands.len(), 1);
    let res = pl.plan().unwrap();
    assert!(res.plan().unwrap().steps.is_empty());
}

#[test]
fn one_step_with_two_edges_has_three_candidates() {
    let p = ha_program(TWO_EDGES, Variant::Linear);
    let cs = system(&p, 1);
    let pl = Planner::new(&cs, &p.queries[0].constraints).unwrap();
    let cands = pl.candidates();
    let tags: Vec<String> = cands
        .iter()
        .map(|c| {
            let on: Vec<String> = c
                .finite
                .iter()
                .filter(|(s, v)| s.step == Some(0) && s.c.name.starts_with('e') && **v == Value::Bool(true))
                .map(|(s, _)| s.c.name.clone())
                .collect();
            on.first().cloned().unwrap_or_else(|| "wait".into())
        })
        .collect();
    assert_eq!(tags, ["wait", "e1", "e2"]);
}

#[test]
fn contradictory_query_is_infeasible() {
    let p = ha_program(TWO_EDGES, Variant::Linear);
    let cs = system(&p, 1);
    let res = plan(&cs, &[q(&[(0, "x", Rel::Eq, 0), (0, "x", Rel::Eq, 5)])]).unwrap();
    assert!(matches!(res.outcome, Outcome::Unsat));
}

#[test]
fn single_wait_step_duration_is_exact() {
    let src = r#"{"variables": ["x2"], "modes": [1], "inv": {"1": "x2 >= 0"},
        "flow": {"linear": {"1": "x2' = -5"}}}"#;
    let p = ha_program(src, Variant::Linear);
    let cs = system(&p, 1);
    let res = plan(&cs, &[q(&[(0, "x2", Rel::Eq, 8), (1, "x2", Rel::Le, 0)])]).unwrap();
    let pl = res.plan().unwrap();
    assert_eq!(exact(&pl.steps[0].label.duration()), r("8/5"));
    assert_eq!(series(pl, "x2"), [rat(8), rat(0)]);
}

#[test]
fn strict_bounds_get_an_interior_point() {
    let src = r#"{"variables": ["x"], "modes": [1], "flow": {"linear": {"1": "x' = 1"}}}"#;
    let p = ha_program(src, Variant::Linear);
    let cs = system(&p, 1);
    let res = plan(&cs, &[q(&[(0, "x", Rel::Eq, 0), (1, "x", Rel::Gt, 1), (1, "x", Rel::Lt, 2)])]).unwrap();
    let x = series(res.plan().unwrap(), "x");
    assert!(x[1] > rat(1) && x[1] < rat(2), "{x:?}");
}

#[test]
fn unsatisfiable_mode_query_needs_no_solver_call() {
    let p = ha_program(TWO_EDGES, Variant::Linear);
    let cs = system(&p, 2);
    let res = plan(&cs, &[q(&[(0, "mode", Rel::Eq, 1), (0, "mode", Rel::Eq, 2)])]).unwrap();
    assert!(matches!(res.outcome, Outcome::Unsat));
    assert_eq!((res.stats.candidates, res.stats.solver_calls), (0, 0));
}

#[test]
fn quadratic_witness_is_gated() {
    let src = r#"{"variables": ["h", "v"], "modes": [1],
        "flow": {"ode": {"1": {"h": "v", "v": "-g"}}},
        "witness": {"1": {"h": "h + v*delta - 0.5*g*delta*delta", "v": "v + (-g)*delta"}}}"#;
    let p = ha_program(src, Variant::Witness).substitute_params(&params(&[("g", "9.8")]));
    let cs = system(&p, 1);
    let e = Planner::new(&cs, &p.queries[0].constraints).err().expect("gate");
    assert!(matches!(e, PlanError::Nonlinear(_)), "{e}");
    assert!(e.to_string().contains("validate"));
}

#[test]
fn markers_are_gated() {
    let p = parse_description(&corpus("car.cp"), "car.cp").unwrap();
    let cs = system(&p, 1);
    let e = Planner::new(&cs, &[]).err().expect("gate");
    assert!(matches!(e, PlanError::Markers(_)), "{e}");
}

#[test]
fn deterministic_and_first_in_order() {
    let p = ha_program(&corpus("water_tank.json"), Variant::Linear).substitute_params(&params(TANK));
    let cs = system(&p, 6);
    let query = &p.queries[0].constraints;
    let a = plan(&cs, query).unwrap();
    let b = plan(&cs, query).unwrap();
    assert_eq!(a.plan().unwrap().to_json(), b.plan().unwrap().to_json());
    assert_eq!(a.stats, b.stats);
    // sequential reference: the first candidate the solver accepts
    let pl = Planner::new(&cs, query).unwrap();
    let cands = pl.candidates();
    let first = cands.iter().position(|c| pl.solve(c).unwrap().is_some()).unwrap();
    assert_eq!(a.stats.solver_calls, first + 1);
    let Outcome::Plan { values, .. } = &a.outcome else { unreachable!() };
    for (s, v) in &cands[first].finite {
        assert_eq!(values[s].to_string(), v.to_string());
    }
}
