//! Exact bounded planning for the linear fragment.
//!
//! Finite stamped constants (modes, events, `wait`) are enumerated depth-first with constraint
//! simplification pruning each prefix; every surviving assignment is a candidate whose residual
//! constraints mention only real constants. A candidate is solved by branching on violated
//! disjunctions over an exact simplex. The first feasible candidate in enumeration order wins.

pub mod linear;
pub mod simplex;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::ControlFlow;

use num_traits::Zero;
use thiserror::Error;

use crate::ground::{stamped_of, CompletedSystem};
use crate::ir::eval::{eval_formula, fix_constants, Interpretation};
use crate::ir::formula::{Formula, Rel, Term};
use crate::ir::plan::{Label, Plan, PlanStep, State};
use crate::ir::sort::{Category, Sort, SortKind, Stamped};
use crate::ir::value::{exact_decimal, fmt_rat, rat_to_f64, Number, Rat, Val, Value};
use crate::par;
use linear::{dnf, linear_atom, linearize, LinearError};
use simplex::LinCons;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("constraint `{0}` holds ODE markers; the exact planner handles linear flows only (use `validate` for numeric checking)")]
    Markers(String),
    #[error("nonlinear constraint `{0}`; the exact planner handles linear flows only (use `validate` for numeric checking)")]
    Nonlinear(String),
    #[error("query: {0}")]
    Query(String),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error("internal: plan fails re-verification of `{0}`")]
    Internal(String),
}

/// A complete assignment of the finite stamped constants with the constraints left on the reals.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub finite: BTreeMap<Stamped, Value>,
    pub residual: Vec<Formula>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlanStats {
    /// Candidates enumerated.
    pub candidates: usize,
    /// Candidates a sequential search solves before it stops.
    pub solver_calls: usize,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Plan { plan: Plan, values: BTreeMap<Stamped, Val> },
    Unsat,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub outcome: Outcome,
    pub stats: PlanStats,
}

impl PlanResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            Outcome::Plan { plan, .. } => Some(plan),
            Outcome::Unsat => None,
        }
    }
}

enum Slot {
    One(Stamped, Vec<Value>),
    /// Mutually exclusive boolean events; the first choice is "none".
    Events(Vec<Stamped>),
}

const BATCH: usize = 32;

pub struct Planner<'a> {
    cs: &'a CompletedSystem,
    query: Vec<Formula>,
    reals: Vec<Stamped>,
    index: BTreeMap<Stamped, usize>,
    slots: Vec<Slot>,
}

fn sort_of<'a>(cs: &'a CompletedSystem, s: &Stamped) -> &'a Sort {
    &cs.program.description.constant(&s.c.name).expect("signature constant is declared").sort
}

fn cmp_atoms<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::Cmp(..) => out.push(f),
        Formula::Not(g) => cmp_atoms(g, out),
        Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| cmp_atoms(g, out)),
        Formula::Implies(a, b) => {
            cmp_atoms(a, out);
            cmp_atoms(b, out);
        }
        _ => {}
    }
}

impl<'a> Planner<'a> {
    /// Checks that every constraint is marker-free and linear in the real constants.
    pub fn new(cs: &'a CompletedSystem, query: &[Formula]) -> Result<Planner<'a>, PlanError> {
        let g = &cs.program;
        let mut query_out = vec![];
        for q in query {
            if let Some(p) = q.params().into_iter().next() {
                return Err(PlanError::Query(format!("unbound parameter `{p}` in `{q}`")));
            }
            for c in q.constants() {
                let s = stamped_of(c).ok_or_else(|| PlanError::Query(format!("`{c}` is not ground")))?;
                if !g.signature.contains(&s) {
                    return Err(PlanError::Query(format!("`{s}` is outside the signature of horizon {}", g.m)));
                }
            }
            query_out.push(q.simplify());
        }
        let reals: Vec<Stamped> = g.signature.iter().filter(|s| !sort_of(cs, s).is_finite()).cloned().collect();
        let index: BTreeMap<Stamped, usize> = reals.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let planner = Planner { cs, query: query_out, reals, index, slots: vec![] };
        if let Some(f) = cs.nontrivial().map(|c| &c.formula).chain(&planner.query).find(|f| f.has_marker()) {
            return Err(PlanError::Markers(f.to_string()));
        }
        for f in cs.nontrivial().map(|c| &c.formula).chain(&planner.query) {
            let mut atoms = vec![];
            cmp_atoms(f, &mut atoms);
            for a in atoms {
                let Formula::Cmp(l, r, rt) = a else { unreachable!() };
                let consts = a.constants();
                let all_real = consts.iter().all(|c| stamped_of(c).is_some_and(|s| planner.index.contains_key(&s)));
                if consts.is_empty() || !all_real {
                    continue;
                }
                match linear_atom(l, *r, rt, &|t| planner.var(t)) {
                    Err(LinearError::Nonlinear(_)) => return Err(PlanError::Nonlinear(a.to_string())),
                    Err(e) => return Err(e.into()),
                    Ok(_) => {}
                }
            }
        }
        Ok(Planner { slots: planner.build_slots(), ..planner })
    }

    fn var(&self, t: &Term) -> Option<usize> {
        match t {
            Term::Const(c) => stamped_of(c).and_then(|s| self.index.get(&s).copied()),
            _ => None,
        }
    }

    fn build_slots(&self) -> Vec<Slot> {
        let g = &self.cs.program;
        let finite: Vec<&Stamped> = g.signature.iter().filter(|s| sort_of(self.cs, s).is_finite()).collect();
        let is_action = |s: &Stamped| g.category(&s.c.name) == Some(Category::Action);
        let is_bool = |s: &Stamped| sort_of(self.cs, s).kind == SortKind::Boolean;
        let has_wait = g.description.constant("wait").is_some_and(|d| d.category == Category::Action && d.sort.kind == SortKind::Boolean);
        let single = |s: &Stamped| Slot::One(s.clone(), sort_of(self.cs, s).domain().unwrap());
        let mut slots: Vec<Slot> = finite.iter().filter(|s| s.step.is_none()).map(|s| single(s)).collect();
        for i in 0..=g.m {
            let at: Vec<&Stamped> = finite.iter().copied().filter(|s| s.step == Some(i)).collect();
            slots.extend(at.iter().filter(|s| !is_action(s)).map(|s| single(s)));
            if has_wait {
                let events: Vec<Stamped> =
                    at.iter().filter(|s| is_action(s) && is_bool(s) && s.c.name != "wait").map(|s| (*s).clone()).collect();
                if !events.is_empty() {
                    slots.push(Slot::Events(events));
                }
                slots.extend(at.iter().filter(|s| is_action(s) && (!is_bool(s) || s.c.name == "wait")).map(|s| single(s)));
            } else {
                slots.extend(at.iter().filter(|s| is_action(s)).map(|s| single(s)));
            }
        }
        slots
    }

    fn initial_constraints(&self) -> Option<Vec<Formula>> {
        let mut out = vec![];
        for f in self.cs.nontrivial().map(|c| c.formula.simplify()).chain(self.query.iter().cloned()) {
            match f {
                Formula::True => {}
                Formula::False => return None,
                f => out.push(f),
            }
        }
        Some(out)
    }

    fn choices(slot: &Slot) -> Vec<BTreeMap<Stamped, Value>> {
        match slot {
            Slot::One(s, dom) => dom.iter().map(|v| BTreeMap::from([(s.clone(), v.clone())])).collect(),
            Slot::Events(evs) => (0..=evs.len())
                .map(|k| evs.iter().enumerate().map(|(j, e)| (e.clone(), Value::Bool(j + 1 == k))).collect())
                .collect(),
        }
    }

    fn dfs(
        &self,
        k: usize,
        finite: &mut BTreeMap<Stamped, Value>,
        cons: &[Formula],
        visit: &mut dyn FnMut(Candidate) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if k == self.slots.len() {
            return visit(Candidate { finite: finite.clone(), residual: cons.to_vec() });
        }
        'choice: for delta in Self::choices(&self.slots[k]) {
            let mut next = Vec::with_capacity(cons.len());
            for f in cons {
                match fix_constants(f, &delta).simplify() {
                    Formula::True => {}
                    Formula::False => continue 'choice,
                    g => next.push(g),
                }
            }
            finite.extend(delta.clone());
            let flow = self.dfs(k + 1, finite, &next, visit);
            for s in delta.keys() {
                finite.remove(s);
            }
            flow?;
        }
        ControlFlow::Continue(())
    }

    /// Visits candidates in enumeration order until `visit` breaks.
    pub fn for_each_candidate(&self, visit: &mut dyn FnMut(Candidate) -> ControlFlow<()>) {
        if let Some(cons) = self.initial_constraints() {
            let _ = self.dfs(0, &mut BTreeMap::new(), &cons, visit);
        }
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = vec![];
        self.for_each_candidate(&mut |c| {
            out.push(c);
            ControlFlow::Continue(())
        });
        out
    }

    /// Exact values of the real constants satisfying the residual constraints, or `None`.
    pub fn solve(&self, cand: &Candidate) -> Result<Option<Vec<Rat>>, PlanError> {
        let mut units: Vec<LinCons> = vec![];
        for (j, s) in self.reals.iter().enumerate() {
            let (lo, hi) = sort_of(self.cs, s).bounds();
            units.extend(lo.map(|b| LinCons::new([(j, Rat::from_integer(1.into()))].into(), Rel::Ge, b)));
            units.extend(hi.map(|b| LinCons::new([(j, Rat::from_integer(1.into()))].into(), Rel::Le, b)));
        }
        let mut clauses: Vec<Vec<Vec<LinCons>>> = vec![];
        for f in &cand.residual {
            if let Some(c) = f.constants().into_iter().find(|c| self.var(&Term::Const((*c).clone())).is_none()) {
                return Err(PlanError::Query(format!("`{c}` is not a real constant of the signature")));
            }
            let d = dnf(&linearize(f, &|t| self.var(t))?);
            match d.len() {
                0 => return Ok(None),
                1 => units.extend(d.into_iter().next().unwrap()),
                _ => clauses.push(d),
            }
        }
        clauses.sort_by_key(Vec::len);
        Ok(branch(self.reals.len(), &mut units, &clauses))
    }

    fn verify(&self, values: &BTreeMap<Stamped, Val>) -> Result<(), PlanError> {
        let mut i = Interpretation::new();
        i.consts = values.clone();
        for f in self.cs.constraints.iter().map(|c| &c.formula).chain(&self.query) {
            if eval_formula(f, &i) != Ok(true) {
                return Err(PlanError::Internal(f.to_string()));
            }
        }
        Ok(())
    }

    fn to_plan(&self, values: &BTreeMap<Stamped, Val>) -> Plan {
        let g = &self.cs.program;
        let state = |i: u32| -> State {
            values
                .iter()
                .filter(|(s, _)| s.step == Some(i) && g.category(&s.c.name).is_some_and(Category::is_fluent))
                .map(|(s, v)| (s.c.clone(), v.clone()))
                .collect()
        };
        let steps = (0..g.m)
            .map(|i| {
                let events: Vec<String> = values
                    .iter()
                    .filter(|(s, v)| {
                        s.step == Some(i)
                            && s.c.name != "wait"
                            && g.category(&s.c.name) == Some(Category::Action)
                            && matches!(v, Val::Bool(true))
                    })
                    .map(|(s, _)| s.c.to_string())
                    .collect();
                let label = if events.is_empty() {
                    let d = values
                        .iter()
                        .find(|(s, _)| s.step == Some(i) && s.c.name == "duration")
                        .and_then(|(_, v)| v.as_number().cloned())
                        .unwrap_or(Number::Exact(Rat::zero()));
                    Label::Wait(d)
                } else {
                    Label::Event(events.join(","))
                };
                PlanStep { label, post: state(i + 1) }
            })
            .collect();
        Plan { initial: state(0), steps }
    }

    /// Solves candidates in batches; the first feasible one in enumeration order becomes the plan.
    pub fn plan(&self) -> Result<PlanResult, PlanError> {
        let mut stats = PlanStats::default();
        let mut found: Option<Result<(Candidate, Vec<Rat>), PlanError>> = None;
        let mut batch: Vec<Candidate> = vec![];
        let mut flush = |batch: &mut Vec<Candidate>, stats: &mut PlanStats| -> ControlFlow<()> {
            let hit = par::find_map_first(&batch.iter().enumerate().collect::<Vec<_>>(), |(k, c)| match self.solve(c) {
                Ok(None) => None,
                Ok(Some(x)) => Some((*k, Ok(x))),
                Err(e) => Some((*k, Err(e))),
            });
            match hit {
                Some((k, r)) => {
                    stats.solver_calls += k + 1;
                    found = Some(r.map(|x| (batch[k].clone(), x)));
                    ControlFlow::Break(())
                }
                None => {
                    stats.solver_calls += batch.len();
                    batch.clear();
                    ControlFlow::Continue(())
                }
            }
        };
        let mut broke = false;
        self.for_each_candidate(&mut |c| {
            stats.candidates += 1;
            batch.push(c);
            if batch.len() == BATCH {
                let f = flush(&mut batch, &mut stats);
                broke = f.is_break();
                return f;
            }
            ControlFlow::Continue(())
        });
        if !broke && !batch.is_empty() {
            let _ = flush(&mut batch, &mut stats);
        }
        let Some(found) = found else {
            return Ok(PlanResult { outcome: Outcome::Unsat, stats });
        };
        let (cand, x) = found?;
        let mut values: BTreeMap<Stamped, Val> = cand.finite.iter().map(|(s, v)| (s.clone(), Val::from(v))).collect();
        values.extend(self.reals.iter().cloned().zip(x.into_iter().map(Val::exact)));
        self.verify(&values)?;
        Ok(PlanResult { outcome: Outcome::Plan { plan: self.to_plan(&values), values }, stats })
    }
}

fn satisfied(x: &[Rat], clause: &[Vec<LinCons>]) -> bool {
    clause.iter().any(|d| d.iter().all(|c| c.holds(x)))
}

/// Adds disjuncts of the first clause the current model violates until every clause holds.
fn branch(n: usize, fixed: &mut Vec<LinCons>, clauses: &[Vec<Vec<LinCons>>]) -> Option<Vec<Rat>> {
    let x = simplex::solve(n, fixed)?;
    let Some(clause) = clauses.iter().find(|c| !satisfied(&x, c)) else {
        return Some(x);
    };
    for d in clause {
        let len = fixed.len();
        fixed.extend(d.iter().cloned());
        let r = branch(n, fixed, clauses);
        fixed.truncate(len);
        if r.is_some() {
            return r;
        }
    }
    None
}

/// Plans over a completed linear system with the query constraints of one query block.
pub fn plan(cs: &CompletedSystem, query: &[Formula]) -> Result<PlanResult, PlanError> {
    Planner::new(cs, query)?.plan()
}

fn cell(v: &Val) -> String {
    match v {
        Val::Num(Number::Exact(r)) if !r.is_integer() => match exact_decimal(r) {
            Some(d) => format!("{} ({d})", fmt_frac(r)),
            None => format!("{} (~{:.6})", fmt_frac(r), rat_to_f64(r)),
        },
        Val::Num(Number::Exact(r)) => fmt_rat(r),
        v => v.to_string(),
    }
}

fn fmt_frac(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Step table: step, label, duration and the fluent values of each state.
pub fn plan_table(p: &Plan) -> String {
    let names: Vec<_> = p.initial.keys().cloned().collect();
    let mut rows: Vec<Vec<String>> = vec![];
    let mut header = vec!["step".to_string(), "label".into(), "delta".into()];
    header.extend(names.iter().map(|n| n.to_string()));
    rows.push(header);
    for (i, st) in p.states().enumerate() {
        let (label, delta) = match i {
            0 => ("-".to_string(), "-".to_string()),
            _ => {
                let l = &p.steps[i - 1].label;
                let name = match l {
                    Label::Event(e) => e.clone(),
                    Label::Wait(_) => "wait".into(),
                };
                (name, cell(&Val::Num(l.duration())))
            }
        };
        let mut row = vec![i.to_string(), label, delta];
        row.extend(names.iter().map(|n| st.get(n).map(cell).unwrap_or_default()));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
