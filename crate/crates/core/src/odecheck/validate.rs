//! Plan replay against a completed description or directly against an automaton.

use std::cell::RefCell;
use std::collections::BTreeMap;

use super::{
    check_dense_invariant, integrate, stamped_val, Judge, Judgement, OdeError, OdeOptions, SampleWitness, Status, StepRecord,
    Trajectory, ValidationReport, Verdict, VectorField, Violation,
};
use crate::ground::{stamped_of, CompletedSystem};
use crate::ir::automaton::{Flow, HybridAutomaton};
use crate::ir::eval::Interpretation;
use crate::ir::formula::{Formula, Term};
use crate::ir::plan::{parse_ground_const, Label, Plan};
use crate::ir::sort::{Category, GroundConst, SortKind, Stamped};
use crate::ir::value::{Number, Val, Value};
use crate::par;

#[derive(Default)]
struct Collector {
    worst: Option<Status>,
    violation: Option<Violation>,
    weak: Vec<String>,
}

impl Collector {
    fn record(&mut self, step: Option<u32>, what: String, j: Judgement, sample: Option<SampleWitness>) {
        self.worst = Some(self.worst.map_or(j.status, |w| w.min(j.status)));
        match j.status {
            Status::Violated if self.violation.is_none() => self.violation = Some(Violation { step, formula: what, sample }),
            Status::Weak => self.weak.push(what),
            _ => {}
        }
    }

    fn verdict(&self) -> Verdict {
        match self.worst {
            Some(Status::Violated) => Verdict::Invalid,
            Some(Status::Weak) => Verdict::UnknownWithinDelta,
            _ => Verdict::Valid,
        }
    }
}

fn label_name(l: &Label) -> String {
    match l {
        Label::Event(e) => e.clone(),
        Label::Wait(d) => format!("wait {d}"),
    }
}

fn events(l: &Label) -> Vec<GroundConst> {
    match l {
        Label::Event(e) => e.split(',').map(parse_ground_const).collect(),
        Label::Wait(_) => vec![],
    }
}

fn max_step(f: &Formula) -> Option<u32> {
    let mut s = None;
    f.visit_terms(&mut |t| {
        if let Term::Const(c) = t {
            s = s.max(c.step);
        }
    });
    s
}

/// Replays `plan` against the completion of a description grounded at the plan's length.
pub fn validate_plan(cs: &CompletedSystem, plan: &Plan, query: &[Formula], opts: &OdeOptions) -> Result<ValidationReport, OdeError> {
    let g = &cs.program;
    let d = &g.description;
    if plan.steps.len() != g.m as usize {
        return Err(OdeError::Dimension(format!("plan has {} steps, the system has horizon {}", plan.steps.len(), g.m)));
    }
    let mut env = Interpretation::new();
    for (i, st) in plan.states().enumerate() {
        for k in st.keys() {
            if !g.signature.contains(&Stamped::at(i as u32, k.clone())) {
                return Err(OdeError::Dimension(format!("state {i} names `{k}`, which is not a fluent of the description")));
            }
        }
    }
    for s in &g.signature {
        let Some(i) = s.step else {
            return Err(OdeError::Dimension(format!("rigid constant `{s}` has no value in a plan")));
        };
        let cat = g.category(&s.c.name).unwrap();
        if cat.is_fluent() {
            let v = plan.state(i as usize).get(&s.c).ok_or_else(|| OdeError::Dimension(format!("state {i} lacks `{}`", s.c)))?;
            env.consts.insert(s.clone(), v.clone());
        }
    }
    for (i, step) in plan.steps.iter().enumerate() {
        let i = i as u32;
        let evs = events(&step.label);
        for e in &evs {
            let st = Stamped::at(i, e.clone());
            let ok = g.signature.contains(&st)
                && g.category(&e.name) == Some(Category::Action)
                && d.constant(&e.name).is_some_and(|c| c.sort.kind == SortKind::Boolean);
            if !ok {
                return Err(OdeError::UnknownLabel(e.to_string()));
            }
        }
        for s in g.signature.iter().filter(|s| s.step == Some(i) && g.category(&s.c.name) == Some(Category::Action)) {
            let decl = d.constant(&s.c.name).unwrap();
            let v = if s.c.name == "duration" {
                Val::Num(step.label.duration())
            } else if s.c.name == "wait" && decl.sort.kind == SortKind::Boolean {
                Val::Bool(evs.is_empty())
            } else if decl.sort.kind == SortKind::Boolean {
                Val::Bool(evs.contains(&s.c))
            } else {
                return Err(OdeError::Dimension(format!("action `{s}` has no value in the plan")));
            };
            env.consts.insert(s.clone(), v);
        }
    }

    let diff: Vec<GroundConst> = d.differentiable();
    let slack = |f: &Formula| f.constants().iter().any(|c| diff.iter().any(|g| g.name == c.name));
    let cache: RefCell<BTreeMap<(u32, Value), Trajectory>> = RefCell::new(BTreeMap::new());
    let records: RefCell<BTreeMap<u32, (Option<f64>, Option<f64>)>> = RefCell::new(BTreeMap::new());
    let sample: RefCell<Option<SampleWitness>> = RefCell::new(None);

    let trajectory = |i: u32, mode: &Value, duration: &Term| -> Result<Trajectory, OdeError> {
        if let Some(t) = cache.borrow().get(&(i, mode.clone())) {
            return Ok(t.clone());
        }
        let row = d.flow_table.get(mode).ok_or_else(|| OdeError::MissingFlow(mode.clone()))?;
        let rhs = diff.iter().map(|c| row.get(c).cloned().ok_or_else(|| OdeError::MissingFlow(mode.clone()))).collect::<Result<_, _>>()?;
        let field = VectorField { names: diff.clone(), rhs };
        let x0 = diff
            .iter()
            .map(|c| stamped_val(&env, &Stamped::at(i, c.clone())).ok_or_else(|| OdeError::Dimension(format!("no value for {i}:{c}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let dur = match super::eval_term(duration, &env) {
            Ok(Val::Num(n)) => n,
            _ => return Err(OdeError::Formula { formula: duration.to_string(), msg: "duration is not a number".into() }),
        };
        let t = integrate(&field, mode, &x0, &dur, opts.step_for(dur.to_f64()))?;
        cache.borrow_mut().insert((i, mode.clone()), t.clone());
        Ok(t)
    };

    let mut marker = |f: &Formula| -> Result<Judgement, OdeError> {
        match f {
            Formula::Integral(m) => {
                let i = m.sources.iter().find_map(|t| match t {
                    Term::Const(c) => c.step,
                    _ => None,
                });
                let i = i.ok_or_else(|| OdeError::NonFluent(f.to_string()))?;
                let t = trajectory(i, &m.mode, &m.duration)?;
                let mut err: f64 = 0.0;
                for (target, end) in m.targets.iter().zip(&t.end) {
                    let s = match target {
                        Term::Const(c) => stamped_of(c),
                        _ => None,
                    }
                    .ok_or_else(|| OdeError::NonFluent(target.to_string()))?;
                    let v = stamped_val(&env, &s).ok_or_else(|| OdeError::Dimension(format!("no value for {s}")))?;
                    let e = v.sub(end);
                    err = err.max(if e.is_zero() { 0.0 } else { e.to_f64().abs() });
                }
                let mut rec = records.borrow_mut();
                let r = rec.entry(i).or_default();
                r.0 = Some(r.0.map_or(err, |x: f64| x.max(err)));
                let status = if err <= opts.delta { Status::Holds } else { Status::Violated };
                Ok(Judgement { status, margin: -err })
            }
            Formula::Dense(m) => {
                let i = match &m.duration {
                    Term::Const(c) => c.step,
                    _ => max_step(&m.body).and_then(|s| s.checked_sub(1)),
                }
                .ok_or_else(|| OdeError::NonFluent(f.to_string()))?;
                let t = trajectory(i, &m.mode, &m.duration)?;
                let rep = check_dense_invariant(&t, &m.body, opts.delta)?;
                let mut rec = records.borrow_mut();
                let r = rec.entry(i).or_default();
                r.1 = Some(r.1.map_or(rep.min_margin, |x: f64| x.min(rep.min_margin)));
                if rep.first_violation.is_some() {
                    *sample.borrow_mut() = rep.first_violation;
                }
                Ok(Judgement { status: rep.status, margin: rep.min_margin })
            }
            _ => unreachable!(),
        }
    };

    let mut checks: Vec<(Option<u32>, &Formula)> =
        cs.constraints.iter().map(|c| &c.formula).chain(query).filter(|f| **f != Formula::True).map(|f| (max_step(f), f)).collect();
    checks.sort_by_key(|(s, _)| *s);
    let judge = Judge { env: &env, delta: opts.delta, slack: &slack };
    let mut col = Collector::default();
    for (step, f) in checks {
        *sample.borrow_mut() = None;
        let j = judge.judge(&f.nnf(), &mut marker)?;
        let w = if j.status == Status::Violated { sample.borrow_mut().take() } else { None };
        col.record(step, f.to_string(), j, w);
    }
    let rec = records.into_inner();
    let steps = plan
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let i = i as u32;
            let r = rec.get(&i).copied().unwrap_or_default();
            StepRecord {
                step: i,
                label: label_name(&s.label),
                mode: env.get(&Stamped::at(i, GroundConst::plain("mode"))).and_then(Val::to_value),
                boundary_error: r.0,
                min_margin: r.1,
            }
        })
        .collect();
    let trajectories = cache.into_inner().into_iter().map(|((i, _), t)| (i, t)).collect();
    Ok(ValidationReport { verdict: col.verdict(), delta: opts.delta, steps, violation: col.violation, weak: col.weak, trajectories })
}

/// Replays `plan` directly against the automaton's flows, invariants, guards and resets.
pub fn validate_ha(h: &HybridAutomaton, plan: &Plan, query: &[Formula], opts: &OdeOptions) -> Result<ValidationReport, OdeError> {
    let names: Vec<GroundConst> = h.variables.iter().map(GroundConst::plain).collect();
    let mode_c = GroundConst::plain("mode");
    let mut states: Vec<(Value, Vec<Number>)> = vec![];
    for (i, st) in plan.states().enumerate() {
        if let Some(k) = st.keys().find(|k| **k != mode_c && !names.contains(k)) {
            return Err(OdeError::Dimension(format!("state {i} names `{k}`, which is not a variable of the automaton")));
        }
        let mode = st.get(&mode_c).and_then(Val::to_value).ok_or_else(|| OdeError::Dimension(format!("state {i} lacks `mode`")))?;
        if !h.modes.contains(&mode) {
            return Err(OdeError::Dimension(format!("state {i} has unknown mode {mode}")));
        }
        let x = names
            .iter()
            .map(|n| st.get(n).and_then(Val::as_number).cloned().ok_or_else(|| OdeError::Dimension(format!("state {i} lacks `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        states.push((mode, x));
    }
    let env_of = |x: &[Number], post: Option<&[Number]>| {
        let mut e = Interpretation::new();
        for (n, v) in names.iter().zip(x) {
            e.set(None, n.clone(), Val::Num(v.clone()));
        }
        if let Some(p) = post {
            for (n, v) in h.variables.iter().zip(p) {
                e.set_var(format!("{n}'"), Val::Num(v.clone()));
            }
        }
        e
    };
    let slack = |_: &Formula| true;
    let mut col = Collector::default();
    let check = |col: &mut Collector, step: u32, env: &Interpretation, f: &Formula, what: String| -> Result<(), OdeError> {
        let j = Judge { env, delta: opts.delta, slack: &slack }.judge(&f.nnf(), &mut |m| Err(OdeError::NonFluent(m.to_string())))?;
        col.record(Some(step), what, j, None);
        Ok(())
    };
    let mode_eq = |a: &Value, b: &Value| Judgement::of(a == b);

    if let Some(init) = h.init.get(&states[0].0) {
        check(&mut col, 0, &env_of(&states[0].1, None), init, format!("init: {init}"))?;
    }
    for (i, (m, x)) in states.iter().enumerate() {
        let inv = h.inv_of(m);
        check(&mut col, i as u32, &env_of(x, None), &inv, format!("invariant of mode {m}: {inv}"))?;
    }
    let mut steps = vec![];
    let mut trajectories = vec![];
    for (i, step) in plan.steps.iter().enumerate() {
        let (i, (m0, x0), (m1, x1)) = (i as u32, &states[i], &states[i + 1]);
        let mut rec = StepRecord { step: i, label: label_name(&step.label), mode: Some(m0.clone()), boundary_error: None, min_margin: None };
        match &step.label {
            Label::Event(e) => {
                let s = h.switch(e).ok_or_else(|| OdeError::UnknownLabel(e.clone()))?;
                col.record(Some(i), format!("{e}: mode = {}", s.from), mode_eq(m0, &s.from), None);
                col.record(Some(i + 1), format!("{e}: mode' = {}", s.to), mode_eq(m1, &s.to), None);
                check(&mut col, i, &env_of(x0, None), &s.guard, format!("guard of {e}: {}", s.guard))?;
                check(&mut col, i, &env_of(x0, Some(x1)), &s.reset, format!("reset of {e}: {}", s.reset))?;
            }
            Label::Wait(dur) => {
                col.record(Some(i), "duration >= 0".into(), Judgement::of(dur.to_f64() >= 0.0), None);
                col.record(Some(i + 1), format!("mode stays {m0}"), mode_eq(m0, m1), None);
                let inv = h.inv_of(m0);
                let ode_rhs = match &h.flow {
                    Flow::Ode(_) => h.ode_rhs(m0),
                    Flow::Linear(_) => None,
                };
                let traj = match ode_rhs {
                    Some(rhs) => {
                        let field = VectorField { names: names.clone(), rhs: h.variables.iter().map(|v| rhs[v].clone()).collect() };
                        let t = integrate(&field, m0, x0, dur, opts.step_for(dur.to_f64()))?;
                        let err = t.end.iter().zip(x1).map(|(a, b)| {
                            let e = a.sub(b);
                            if e.is_zero() { 0.0 } else { e.to_f64().abs() }
                        });
                        let err = err.fold(0.0, f64::max);
                        rec.boundary_error = Some(err);
                        let j = Judgement { status: if err <= opts.delta { Status::Holds } else { Status::Violated }, margin: -err };
                        col.record(Some(i + 1), format!("flow of mode {m0} reaches the post-state"), j, None);
                        t
                    }
                    None => {
                        let flow = match &h.flow {
                            Flow::Linear(f) => f.get(m0).cloned().unwrap_or(Formula::True),
                            _ => return Err(OdeError::MissingFlow(m0.clone())),
                        };
                        if dur.is_zero() {
                            let same = Formula::and(names.iter().map(|n| Formula::eq(Term::Primed(n.name.clone()), Term::constant(n.name.clone()))).collect());
                            check(&mut col, i, &env_of(x0, Some(x1)), &same, "zero-duration flow keeps the state".into())?;
                        } else {
                            let rates: Vec<Number> =
                                x0.iter().zip(x1).map(|(a, b)| b.sub(a).div(dur).expect("nonzero duration")).collect();
                            check(&mut col, i, &env_of(x0, Some(&rates)), &flow, format!("flow of mode {m0}: {flow}"))?;
                        }
                        Trajectory::linear(m0, &names, x0, x1, dur.to_f64(), 100)
                    }
                };
                let rep = check_dense_invariant(&traj, &inv, opts.delta)?;
                rec.min_margin = Some(rep.min_margin);
                col.record(Some(i), format!("always_t invariant of mode {m0}: {inv}"), Judgement { status: rep.status, margin: rep.min_margin }, rep.first_violation);
                trajectories.push((i, traj));
            }
        }
        steps.push(rec);
    }
    if !query.is_empty() {
        let mut env = Interpretation::new();
        for (i, (m, x)) in states.iter().enumerate() {
            env.consts.insert(Stamped::at(i as u32, mode_c.clone()), Val::from(m));
            for (n, v) in names.iter().zip(x) {
                env.consts.insert(Stamped::at(i as u32, n.clone()), Val::Num(v.clone()));
            }
        }
        for (i, s) in plan.steps.iter().enumerate() {
            let i = i as u32;
            let evs = events(&s.label);
            env.consts.insert(Stamped::at(i, GroundConst::plain("duration")), Val::Num(s.label.duration()));
            env.consts.insert(Stamped::at(i, GroundConst::plain("wait")), Val::Bool(evs.is_empty()));
            for e in h.hevents() {
                env.consts.insert(Stamped::at(i, GroundConst::plain(e)), Val::Bool(evs.contains(&GroundConst::plain(e))));
            }
        }
        for q in query {
            check(&mut col, max_step(q).unwrap_or(0), &env, q, format!("query: {q}"))?;
        }
    }
    Ok(ValidationReport { verdict: col.verdict(), delta: opts.delta, steps, violation: col.violation, weak: col.weak, trajectories })
}

/// Validates independent plans concurrently, preserving input order.
pub fn validate_all(cs: &CompletedSystem, plans: &[Plan], query: &[Formula], opts: &OdeOptions) -> Vec<Result<ValidationReport, OdeError>> {
    par::map(plans, |p| validate_plan(cs, p, query, opts))
}
