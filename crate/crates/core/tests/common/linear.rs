//! Random two-dimensional linear automata with rational grid data, and a brute-force oracle
//! that searches label sequences with durations on a 1/8 grid.

use std::collections::BTreeMap;

use hybrid_cplus::desugar::expand_abbreviations;
use hybrid_cplus::frontend::parse_ha;
use hybrid_cplus::ground::{build_Dm, complete, CompletedSystem};
use hybrid_cplus::ir::automaton::HybridAutomaton;
use hybrid_cplus::ir::formula::{Formula, Rel};
use hybrid_cplus::ir::plan::{Label, Plan, PlanStep, State};
use hybrid_cplus::ir::sort::GroundConst;
use hybrid_cplus::ir::value::{rat, ratio, Number, Rat, Val, Value};
use hybrid_cplus::lraplan::{plan, plan_table};
use hybrid_cplus::odecheck::{validate_ha, validate_plan, OdeOptions, Verdict};
use hybrid_cplus::translate::{translate, TranslationOptions, Variant};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DUR_BOUND: i64 = 2;
pub const GRID: i64 = 8;

/// `a·x + b·y rel c`.
#[derive(Clone, Debug)]
pub struct Atom {
    pub a: i64,
    pub b: i64,
    pub rel: Rel,
    pub c: i64,
}

impl Atom {
    fn holds(&self, x: &[Rat; 2]) -> bool {
        let v = rat(self.a) * &x[0] + rat(self.b) * &x[1];
        self.rel.holds(v.cmp(&rat(self.c)))
    }

    fn text(&self) -> String {
        let term = |k: i64, v: &str| match k {
            1 => v.to_string(),
            -1 => format!("-{v}"),
            k => format!("{k} * {v}"),
        };
        let lhs = match (self.a, self.b) {
            (0, b) => term(b, "y"),
            (a, 0) => term(a, "x"),
            (a, b) => format!("{} + {}", term(a, "x"), term(b, "y")),
        };
        format!("{lhs} {} {}", self.rel.symbol(), self.c)
    }
}

#[derive(Clone, Debug)]
pub struct Switch {
    pub from: i64,
    pub to: i64,
    pub name: String,
    pub guard: Option<Atom>,
    /// Variable index set to a constant; identity otherwise.
    pub reset: Option<(usize, i64)>,
}

#[derive(Clone, Debug)]
pub struct RandomAutomaton {
    pub modes: Vec<i64>,
    pub rates: BTreeMap<i64, [Rat; 2]>,
    pub inv: BTreeMap<i64, Vec<Atom>>,
    pub switches: Vec<Switch>,
    pub init: [i64; 2],
    pub m: u32,
    /// `step:var rel c` query atoms.
    pub goals: Vec<(u32, usize, Rel, i64)>,
}

const VARS: [&str; 2] = ["x", "y"];

/// A label with the target mode and state.
type Move = (Label, i64, [Rat; 2]);

fn fmt_rate(r: &Rat) -> String {
    hybrid_cplus::ir::value::exact_decimal(r).unwrap()
}

impl RandomAutomaton {
    pub fn random(rng: &mut impl Rng) -> RandomAutomaton {
        let k = rng.gen_range(1..=2);
        let modes: Vec<i64> = (1..=k).collect();
        let rate_choices = [rat(-2), rat(-1), ratio(-1, 2), rat(0), ratio(1, 2), rat(1), rat(2)];
        let mut rates = BTreeMap::new();
        let mut inv = BTreeMap::new();
        let atom = |rng: &mut dyn rand::RngCore| {
            let (a, b) = *[(1, 0), (0, 1), (1, 1), (1, -1)].choose(rng).unwrap();
            let rel = if rng.gen_bool(0.5) { Rel::Le } else { Rel::Ge };
            Atom { a, b, rel, c: rng.gen_range(-3..=6) }
        };
        for &v in &modes {
            rates.insert(v, [rate_choices.choose(rng).unwrap().clone(), rate_choices.choose(rng).unwrap().clone()]);
            let n = rng.gen_range(0..=2);
            inv.insert(v, (0..n).map(|_| atom(rng)).collect());
        }
        let mut switches = vec![];
        let edge = |rng: &mut dyn rand::RngCore, from, to, name: &str| Switch {
            from,
            to,
            name: name.into(),
            guard: rng.gen_bool(0.7).then(|| atom(rng)),
            reset: rng.gen_bool(0.4).then(|| (rng.gen_range(0..2), rng.gen_range(0..=3))),
        };
        if k == 2 {
            switches.push(edge(rng, 1, 2, "e1"));
            if rng.gen_bool(0.6) {
                switches.push(edge(rng, 2, 1, "e2"));
            }
        } else if rng.gen_bool(0.5) {
            switches.push(edge(rng, 1, 1, "e1"));
        }
        let m = rng.gen_range(1..=3);
        let goals = (0..rng.gen_range(1..=2))
            .map(|_| {
                let rel = if rng.gen_bool(0.5) { Rel::Le } else { Rel::Ge };
                (rng.gen_range(1..=m), rng.gen_range(0..2), rel, rng.gen_range(-2..=6))
            })
            .collect();
        RandomAutomaton { modes, rates, inv, switches, init: [rng.gen_range(0..=3), rng.gen_range(0..=3)], m, goals }
    }

    pub fn to_json(&self) -> String {
        let atoms = |v: &[Atom]| v.iter().map(Atom::text).collect::<Vec<_>>().join(" & ");
        let switches: Vec<String> = self
            .switches
            .iter()
            .map(|s| {
                let mut f = vec![format!(r#""from": {}, "to": {}, "hevent": "{}""#, s.from, s.to, s.name)];
                if let Some(g) = &s.guard {
                    f.push(format!(r#""guard": "{}""#, g.text()));
                }
                let reset: Vec<String> = (0..2)
                    .map(|j| match s.reset {
                        Some((k, c)) if k == j => format!("{}' = {c}", VARS[j]),
                        _ => format!("{0}' = {0}", VARS[j]),
                    })
                    .collect();
                f.push(format!(r#""reset": "{}""#, reset.join(" & ")));
                format!("{{{}}}", f.join(", "))
            })
            .collect();
        let inv: Vec<String> =
            self.inv.iter().filter(|(_, v)| !v.is_empty()).map(|(m, v)| format!(r#""{m}": "{}""#, atoms(v))).collect();
        let flow: Vec<String> = self
            .rates
            .iter()
            .map(|(m, r)| format!(r#""{m}": "x' = {} & y' = {}""#, fmt_rate(&r[0]), fmt_rate(&r[1])))
            .collect();
        let goals: Vec<String> =
            self.goals.iter().map(|(i, v, r, c)| format!(r#""{i}:{} {} {c}""#, VARS[*v], r.symbol())).collect();
        format!(
            r#"{{"variables": ["x", "y"], "modes": {:?}, "switches": [{}], "init": {{"1": "x = {} & y = {}"}},
"inv": {{{}}}, "flow": {{"linear": {{{}}}}},
"query": {{"label": "q", "maxstep": {}, "constraints": [{}]}}}}"#,
            self.modes,
            switches.join(", "),
            self.init[0],
            self.init[1],
            inv.join(", "),
            flow.join(", "),
            self.m,
            goals.join(", ")
        )
    }

    fn inv_holds(&self, mode: i64, x: &[Rat; 2]) -> bool {
        self.inv[&mode].iter().all(|a| a.holds(x))
    }

    fn goals_hold(&self, step: u32, x: &[Rat; 2]) -> bool {
        self.goals.iter().filter(|g| g.0 == step).all(|(_, v, r, c)| r.holds(x[*v].cmp(&rat(*c))))
    }

    /// Label choices at a state, waits on the duration grid first.
    fn moves(&self, mode: i64, x: &[Rat; 2]) -> Vec<Move> {
        let mut out = vec![];
        let r = &self.rates[&mode];
        for k in 0..=DUR_BOUND * GRID {
            let d = ratio(k, GRID);
            let y = [&x[0] + &r[0] * &d, &x[1] + &r[1] * &d];
            // constant rates and convex invariants: the segment stays inside iff its endpoints do
            if self.inv_holds(mode, &y) {
                out.push((Label::Wait(Number::Exact(d)), mode, y));
            }
        }
        for s in self.switches.iter().filter(|s| s.from == mode) {
            if s.guard.as_ref().is_some_and(|g| !g.holds(x)) {
                continue;
            }
            let mut y = x.clone();
            if let Some((j, c)) = s.reset {
                y[j] = rat(c);
            }
            if self.inv_holds(s.to, &y) {
                out.push((Label::Event(s.name.clone()), s.to, y));
            }
        }
        out
    }

    fn start(&self) -> Option<(i64, [Rat; 2])> {
        let x = [rat(self.init[0]), rat(self.init[1])];
        self.inv_holds(1, &x).then_some((1, x))
    }

    /// First grid path satisfying the query, in wait-first order.
    pub fn oracle(&self) -> Option<Plan> {
        let (mode, x) = self.start()?;
        let mut path = vec![];
        self.dfs(mode, &x, &mut path, &mut |_| {}, true).then(|| to_plan(mode, &x, &path))
    }

    /// A random analytic run of `self.m` steps on the grid, ignoring the query.
    pub fn random_run(&self, rng: &mut impl Rng) -> Option<Plan> {
        let (mode, x) = self.start()?;
        let mut path = vec![];
        self.dfs(mode, &x, &mut path, &mut |v| v.shuffle(rng), false).then(|| to_plan(mode, &x, &path))
    }

    fn dfs(
        &self,
        mode: i64,
        x: &[Rat; 2],
        path: &mut Vec<Move>,
        order: &mut dyn FnMut(&mut Vec<Move>),
        goals: bool,
    ) -> bool {
        if path.len() as u32 == self.m {
            return true;
        }
        let mut moves = self.moves(mode, x);
        order(&mut moves);
        for mv in moves {
            let step = path.len() as u32 + 1;
            if goals && !self.goals_hold(step, &mv.2) {
                continue;
            }
            let (m2, y) = (mv.1, mv.2.clone());
            path.push(mv);
            if self.dfs(m2, &y, path, order, goals) {
                return true;
            }
            path.pop();
        }
        false
    }
}

fn state(mode: i64, x: &[Rat; 2]) -> State {
    let mut s = State::new();
    s.insert(GroundConst::plain("mode"), Val::from(&Value::int(mode)));
    s.insert(GroundConst::plain("x"), Val::exact(x[0].clone()));
    s.insert(GroundConst::plain("y"), Val::exact(x[1].clone()));
    s
}

fn to_plan(mode: i64, x: &[Rat; 2], path: &[Move]) -> Plan {
    Plan {
        initial: state(mode, x),
        steps: path.iter().map(|(l, m, y)| PlanStep { label: l.clone(), post: state(*m, y) }).collect(),
    }
}

/// Whether every wait duration of the plan lies on the oracle's grid.
pub fn on_grid(p: &Plan) -> bool {
    p.steps.iter().all(|s| match s.label.duration() {
        Number::Exact(d) => (d.clone() * rat(GRID)).is_integer() && d <= rat(DUR_BOUND),
        Number::Approx(_) => false,
    })
}

/// A seeded automaton with its translated, grounded and completed linear description.
pub struct Case {
    pub auto: RandomAutomaton,
    pub h: HybridAutomaton,
    pub cs: CompletedSystem,
    pub query: Vec<Formula>,
}

impl Case {
    pub fn new(seed: u64) -> Case {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let auto = RandomAutomaton::random(&mut rng);
        let json = auto.to_json();
        let h = parse_ha(&json, "random.json").unwrap_or_else(|e| panic!("{e}\n{json}"));
        let opts = TranslationOptions { variant: Variant::Linear, include_init: true, dur_bound: Some(rat(DUR_BOUND)) };
        let p = translate(&h, &opts).unwrap();
        let cs = complete(&build_Dm(&expand_abbreviations(&p.description).unwrap(), auto.m)).unwrap();
        let query = p.queries[0].constraints.clone();
        Case { auto, h, cs, query }
    }

    /// A random analytic run satisfies the grounded constraints; `Ok(false)` when no run exists.
    pub fn check_run(&self, seed: u64) -> Result<bool, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let Some(run) = self.auto.random_run(&mut rng) else { return Ok(false) };
        let r = validate_plan(&self.cs, &run, &[], &OdeOptions::new(0.0)).map_err(|e| e.to_string())?;
        if r.verdict != Verdict::Valid {
            return Err(format!("seed {seed}: run rejected\n{}\n{}\n{r}", self.auto.to_json(), plan_table(&run)));
        }
        Ok(true)
    }

    /// Planner plans replay on the automaton and the planner agrees with the grid search.
    /// Returns whether a plan was found and whether its durations lie on the grid.
    pub fn check_planner(&self, seed: u64) -> Result<(bool, bool), String> {
        let json = self.auto.to_json();
        let res = plan(&self.cs, &self.query).map_err(|e| format!("seed {seed}: {e}\n{json}"))?;
        let oracle = self.auto.oracle();
        match (res.plan(), oracle) {
            (Some(p), oracle) => {
                let goals = self.h.query.as_ref().map(|q| q.constraints.clone()).unwrap_or_default();
                let r = validate_ha(&self.h, p, &goals, &OdeOptions::new(0.0)).map_err(|e| e.to_string())?;
                if r.verdict != Verdict::Valid {
                    return Err(format!("seed {seed}: plan rejected by the automaton\n{json}\n{}\n{r}", plan_table(p)));
                }
                let grid = on_grid(p);
                if grid && oracle.is_none() {
                    return Err(format!("seed {seed}: grid search misses\n{json}\n{}", plan_table(p)));
                }
                Ok((true, grid))
            }
            (None, Some(o)) => Err(format!("seed {seed}: planner misses\n{json}\n{}", plan_table(&o))),
            (None, None) => Ok((false, false)),
        }
    }
}
