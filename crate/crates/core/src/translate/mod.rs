//! Hybrid automaton to C+ translations: linear-convex, witness-function and ODE.

use std::collections::BTreeMap;

use crate::frontend::ha::mode_sort;
use crate::ir::automaton::{Flow, HybridAutomaton};
use crate::ir::eval::substitute_term;
use crate::ir::formula::{ArithOp, ConstRef, Formula, Rel, Term};
use crate::ir::law::{ActionDescription, CausalLaw, ModeRef, Program, QueryBlock, VarDecl};
use crate::ir::sort::{Category, ConstantDecl, Implicit, Sort};
use crate::ir::value::{Rat, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("flow of mode {0} is not linear in the derivatives alone; use the ode variant")]
    NonLinearFlow(Value),
    #[error("invariant of mode {0} is not a conjunction of linear inequalities; use the ode variant")]
    NonConvexInvariant(Value),
    #[error("no witness for {var} in mode {mode}")]
    MissingWitness { mode: Value, var: String },
    #[error("no derivative for {var} in mode {mode}")]
    MissingRhs { mode: Value, var: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Linear,
    Witness,
    Ode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationOptions {
    pub variant: Variant,
    /// Adds `⋁_v (0:mode = v ∧ 0:Init_v)` to the query.
    pub include_init: bool,
    /// Upper bound on `duration`; unbounded (non-negative reals) by default.
    pub dur_bound: Option<Rat>,
}

impl Default for TranslationOptions {
    fn default() -> Self {
        TranslationOptions { variant: Variant::Linear, include_init: true, dur_bound: None }
    }
}

fn c(name: &str) -> Term {
    Term::constant(name)
}

fn mode_is(v: &Value) -> Formula {
    Formula::eq(c("mode"), Term::Lit(v.clone()))
}

/// Polynomial degree of `t` in the symbols selected by `is_sym`; `None` when not polynomial.
fn degree(t: &Term, is_sym: &dyn Fn(&Term) -> bool) -> Option<u32> {
    if is_sym(t) {
        return Some(1);
    }
    match t {
        Term::Lit(_) | Term::Param(_) | Term::Pi => Some(0),
        Term::Neg(x) => degree(x, is_sym),
        Term::Bin(ArithOp::Add | ArithOp::Sub, a, b) => Some(degree(a, is_sym)?.max(degree(b, is_sym)?)),
        Term::Bin(ArithOp::Mul, a, b) => Some(degree(a, is_sym)? + degree(b, is_sym)?),
        Term::Bin(ArithOp::Div, a, b) => (degree(b, is_sym)? == 0).then(|| degree(a, is_sym)).flatten(),
        Term::Func(_, x) => (degree(x, is_sym)? == 0).then_some(0),
        Term::Var(_) | Term::Const(_) | Term::Primed(_) => None,
    }
}

fn linear_atom(f: &Formula, is_sym: &dyn Fn(&Term) -> bool) -> bool {
    match f {
        Formula::Cmp(a, _, b) => degree(a, is_sym).is_some_and(|d| d <= 1) && degree(b, is_sym).is_some_and(|d| d <= 1),
        _ => false,
    }
}

fn linear_formula(f: &Formula, is_sym: &dyn Fn(&Term) -> bool) -> bool {
    match f {
        Formula::True | Formula::False => true,
        Formula::Cmp(..) => linear_atom(f, is_sym),
        Formula::Not(g) => linear_formula(g, is_sym),
        Formula::And(v) | Formula::Or(v) => v.iter().all(|g| linear_formula(g, is_sym)),
        Formula::Implies(a, b) => linear_formula(a, is_sym) && linear_formula(b, is_sym),
        _ => false,
    }
}

/// Syntactic convexity: a conjunction of linear (in)equalities over the automaton variables.
pub fn is_convex_invariant(f: &Formula, h: &HybridAutomaton) -> bool {
    let is_x = |t: &Term| matches!(t, Term::Const(c) if c.args.is_empty() && h.variables.contains(&c.name));
    f.conjuncts().into_iter().all(|a| linear_atom(a, &is_x))
}

/// Flow as a formula over `x'`, converting constant ODE right-hand sides.
fn linear_flow(h: &HybridAutomaton, v: &Value) -> Result<Formula, TranslateError> {
    let is_dx = |t: &Term| matches!(t, Term::Primed(x) if h.variables.contains(x));
    let f = match &h.flow {
        Flow::Linear(m) => m.get(v).cloned().unwrap_or(Formula::True),
        Flow::Ode(m) => {
            let row = m.get(v).ok_or_else(|| TranslateError::MissingRhs { mode: v.clone(), var: h.variables[0].clone() })?;
            let mut eqs = vec![];
            for x in &h.variables {
                let rhs = row.get(x).ok_or_else(|| TranslateError::MissingRhs { mode: v.clone(), var: x.clone() })?;
                eqs.push(Formula::eq(Term::Primed(x.clone()), rhs.clone()));
            }
            Formula::and(eqs)
        }
    };
    if linear_formula(&f, &is_dx) {
        Ok(f)
    } else {
        Err(TranslateError::NonLinearFlow(v.clone()))
    }
}

struct Names {
    pre: Vec<Term>,
    dur: Term,
}

fn declarations(h: &HybridAutomaton, opts: &TranslationOptions) -> (ActionDescription, Names) {
    let msort = mode_sort(&h.modes);
    let mut sorts = vec![];
    if !msort.name.starts_with("integer[") {
        sorts.push(msort.clone());
    }
    let mut constants = vec![];
    for x in &h.variables {
        let cat = if opts.variant == Variant::Ode { Category::DifferentiableFluent } else { Category::SimpleFluent };
        constants.push(ConstantDecl::new(x.clone(), Sort::real(), cat));
    }
    constants.push(ConstantDecl::new("mode", msort, Category::SimpleFluent).with_implicit(Implicit::Inertial));
    for s in &h.switches {
        constants.push(
            ConstantDecl::new(s.hevent.clone(), Sort::boolean(), Category::Action).with_implicit(Implicit::Exogenous),
        );
    }
    constants.push(ConstantDecl::new("wait", Sort::boolean(), Category::Action));
    let dsort = match &opts.dur_bound {
        Some(b) => Sort::interval(Rat::from_integer(0.into()), b.clone()),
        None => Sort::nonneg_real(),
    };
    constants.push(ConstantDecl::new("duration", dsort, Category::Action).with_implicit(Implicit::Exogenous));
    let mut variables: Vec<VarDecl> =
        h.variables.iter().map(|x| VarDecl { name: format!("P_{x}"), sort: Sort::real() }).collect();
    variables.push(VarDecl { name: "T".into(), sort: Sort::real() });
    let names = Names { pre: h.variables.iter().map(|x| Term::var(format!("P_{x}"))).collect(), dur: Term::var("T") };
    (ActionDescription { sorts, constants, variables, laws: vec![] }, names)
}

/// Replaces `x` by the pre-state variable and `x'` by the post-state constant.
fn relational(f: &Formula, h: &HybridAutomaton, n: &Names) -> Formula {
    f.transform_terms(&mut |t| match t {
        Term::Const(ConstRef { name, args, step: None }) if args.is_empty() => {
            h.variables.iter().position(|x| x == name).map(|i| n.pre[i].clone())
        }
        Term::Primed(x) => h.variables.contains(x).then(|| c(x)),
        _ => None,
    })
}

fn pre_binding(h: &HybridAutomaton, n: &Names) -> Vec<Formula> {
    h.variables.iter().zip(&n.pre).map(|(x, p)| Formula::eq(c(x), p.clone())).collect()
}

fn wait_after(h: &HybridAutomaton, n: &Names, v: &Value, dur: Term) -> Vec<Formula> {
    let mut a = pre_binding(h, n);
    a.push(mode_is(v));
    a.push(Formula::eq(c("duration"), dur));
    a.push(Formula::holds(c("wait")));
    a
}

/// Guard, reset, mode and wait laws shared by every variant.
fn discrete_laws(h: &HybridAutomaton, n: &Names, laws: &mut Vec<CausalLaw>) {
    let t = Formula::True;
    for s in &h.switches {
        let e = Formula::holds(c(&s.hevent));
        if s.guard != Formula::True {
            laws.push(CausalLaw::Nonexecutable { f: e.clone(), if_: Formula::not(s.guard.clone()) });
        }
        let mut after = pre_binding(h, n);
        after.push(e.clone());
        laws.push(CausalLaw::Constraint { f: relational(&s.reset, h, n), after: Some(Formula::and(after)) });
        laws.push(CausalLaw::Nonexecutable { f: e.clone(), if_: Formula::not(mode_is(&s.from)) });
        laws.push(CausalLaw::Causes { cause: e.clone(), effect: mode_is(&s.to), if_: t.clone() });
        laws.push(CausalLaw::Causes {
            cause: e.clone(),
            effect: Formula::eq(c("duration"), Term::int(0)),
            if_: t.clone(),
        });
        laws.push(CausalLaw::Causes {
            cause: e,
            effect: Formula::eq(c("wait"), Term::Lit(Value::Bool(false))),
            if_: t.clone(),
        });
    }
    laws.push(CausalLaw::Default { f: Formula::holds(c("wait")), if_: t, after: None });
}

fn state_invariants(h: &HybridAutomaton, laws: &mut Vec<CausalLaw>) {
    for v in &h.modes {
        let inv = h.inv_of(v);
        if inv != Formula::True {
            laws.push(CausalLaw::Constraint { f: Formula::implies(mode_is(v), inv), after: None });
        }
    }
}

/// Translates an automaton; the query carries the automaton's query plus, optionally, `Init`.
pub fn translate(h: &HybridAutomaton, opts: &TranslationOptions) -> Result<Program, TranslateError> {
    let (mut d, n) = declarations(h, opts);
    let mut laws = vec![];
    if opts.variant != Variant::Ode {
        for x in &h.variables {
            laws.push(CausalLaw::Exogenous {
                c: ConstRef { name: x.clone(), args: vec![], step: None },
                if_: Formula::True,
            });
        }
    }
    discrete_laws(h, &n, &mut laws);
    match opts.variant {
        Variant::Linear => {
            for v in &h.modes {
                if !is_convex_invariant(&h.inv_of(v), h) {
                    return Err(TranslateError::NonConvexInvariant(v.clone()));
                }
                let flow = linear_flow(h, v)?;
                // Flow_v((X - x) / δ) for δ > 0.
                let slopes = flow.transform_terms(&mut |t| match t {
                    Term::Primed(x) => h.variables.iter().position(|y| y == x).map(|i| {
                        Term::bin(ArithOp::Div, Term::bin(ArithOp::Sub, c(x), n.pre[i].clone()), n.dur.clone())
                    }),
                    _ => None,
                });
                let mut after = wait_after(h, &n, v, n.dur.clone());
                after.push(Formula::cmp(n.dur.clone(), Rel::Gt, Term::int(0)));
                laws.push(CausalLaw::Constraint { f: slopes, after: Some(Formula::and(after)) });
                let stay: Vec<Formula> =
                    h.variables.iter().zip(&n.pre).map(|(x, p)| Formula::eq(c(x), p.clone())).collect();
                laws.push(CausalLaw::Constraint {
                    f: Formula::and(stay),
                    after: Some(Formula::and(wait_after(h, &n, v, Term::int(0)))),
                });
            }
            state_invariants(h, &mut laws);
        }
        Variant::Witness => {
            let ws = h.witness.clone().unwrap_or_default();
            for v in &h.modes {
                let mut eqs = vec![];
                for x in &h.variables {
                    let f = ws
                        .get(v)
                        .and_then(|r| r.get(x))
                        .ok_or_else(|| TranslateError::MissingWitness { mode: v.clone(), var: x.clone() })?;
                    let f = substitute_term(f, &BTreeMap::from([("delta".to_string(), n.dur.clone())]));
                    let f = f.transform(&mut |t| match t {
                        Term::Const(k) if k.args.is_empty() && k.step.is_none() => {
                            h.variables.iter().position(|y| *y == k.name).map(|j| n.pre[j].clone())
                        }
                        _ => None,
                    });
                    eqs.push(Formula::eq(c(x), f));
                }
                laws.push(CausalLaw::Constraint {
                    f: Formula::and(eqs),
                    after: Some(Formula::and(wait_after(h, &n, v, n.dur.clone()))),
                });
            }
            state_invariants(h, &mut laws);
        }
        Variant::Ode => {
            for v in &h.modes {
                let row = h.ode_rhs(v);
                for x in &h.variables {
                    let rhs = row
                        .as_ref()
                        .and_then(|r| r.get(x))
                        .ok_or_else(|| TranslateError::MissingRhs { mode: v.clone(), var: x.clone() })?;
                    laws.push(CausalLaw::Rate {
                        fluent: ConstRef { name: x.clone(), args: vec![], step: None },
                        rhs: rhs.clone(),
                        mode: ModeRef::Value(v.clone()),
                    });
                }
            }
            state_invariants(h, &mut laws);
            for v in &h.modes {
                let inv = h.inv_of(v);
                if inv != Formula::True {
                    laws.push(CausalLaw::AlwaysT { body: inv, mode: ModeRef::Value(v.clone()) });
                }
            }
        }
    }
    d.laws = laws;
    let mut query = h.query.clone().unwrap_or(QueryBlock { label: "query".into(), maxstep: None, constraints: vec![] });
    if opts.include_init && !h.init.is_empty() {
        let init = Formula::or(
            h.init
                .iter()
                .map(|(v, f)| crate::ir::eval::stamp(&Formula::and(vec![mode_is(v), f.clone()]), 0))
                .collect(),
        );
        query.constraints.insert(0, init);
    }
    Ok(Program { description: d, queries: vec![query] })
}

pub fn translate_linear(h: &HybridAutomaton) -> Result<ActionDescription, TranslateError> {
    Ok(translate(h, &TranslationOptions { variant: Variant::Linear, ..Default::default() })?.description)
}

pub fn translate_witness(h: &HybridAutomaton) -> Result<ActionDescription, TranslateError> {
    Ok(translate(h, &TranslationOptions { variant: Variant::Witness, ..Default::default() })?.description)
}

pub fn translate_ode(h: &HybridAutomaton) -> Result<ActionDescription, TranslateError> {
    Ok(translate(h, &TranslationOptions { variant: Variant::Ode, ..Default::default() })?.description)
}
