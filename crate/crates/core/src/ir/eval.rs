use std::collections::BTreeMap;

use thiserror::Error;

use super::formula::{ArithOp, ConstRef, Formula, Rel, Term};
use super::sort::{GroundConst, Stamped};
use super::value::{Number, Val, Value};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("marker `{0}` has no symbolic value")]
    Marker(String),
}

/// Values of (optionally stamped) ground constants plus bindings of variables and parameters.
#[derive(Clone, Debug, Default)]
pub struct Interpretation {
    pub consts: BTreeMap<Stamped, Val>,
    pub vars: BTreeMap<String, Val>,
}

impl Interpretation {
    pub fn new() -> Interpretation {
        Interpretation::default()
    }

    pub fn set(&mut self, step: Option<u32>, c: GroundConst, v: Val) {
        self.consts.insert(Stamped { step, c }, v);
    }

    pub fn set_var(&mut self, name: impl Into<String>, v: Val) {
        self.vars.insert(name.into(), v);
    }

    pub fn get(&self, s: &Stamped) -> Option<&Val> {
        self.consts.get(s)
    }
}

pub fn resolve_const(c: &ConstRef, i: &Interpretation) -> Result<Stamped, EvalError> {
    let mut args = Vec::with_capacity(c.args.len());
    for a in &c.args {
        match eval_term(a, i)?.to_value() {
            Some(v) => args.push(v),
            None => return Err(EvalError::SortMismatch(format!("non-exact argument in {c}"))),
        }
    }
    Ok(Stamped { step: c.step, c: GroundConst { name: c.name.clone(), args } })
}

pub fn eval_term(t: &Term, i: &Interpretation) -> Result<Val, EvalError> {
    let num = |t: &Term| -> Result<Number, EvalError> {
        match eval_term(t, i)? {
            Val::Num(n) => Ok(n),
            v => Err(EvalError::SortMismatch(format!("`{t}` is {v}, expected a number"))),
        }
    };
    match t {
        Term::Lit(v) => Ok(Val::from(v)),
        Term::Var(v) | Term::Param(v) => i.vars.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Primed(v) => i.vars.get(&format!("{v}'")).cloned().ok_or_else(|| EvalError::Unbound(format!("{v}'"))),
        Term::Pi => Ok(Val::approx(std::f64::consts::PI)),
        Term::Const(c) => {
            let s = resolve_const(c, i)?;
            i.get(&s).cloned().ok_or_else(|| EvalError::Unbound(s.to_string()))
        }
        Term::Neg(x) => Ok(Val::Num(num(x)?.neg())),
        Term::Bin(op, a, b) => {
            let (x, y) = (num(a)?, num(b)?);
            Ok(Val::Num(match op {
                ArithOp::Add => x.add(&y),
                ArithOp::Sub => x.sub(&y),
                ArithOp::Mul => x.mul(&y),
                ArithOp::Div => x.div(&y).ok_or_else(|| EvalError::DivisionByZero(t.to_string()))?,
            }))
        }
        Term::Func(g, x) => Ok(Val::approx(g.apply(num(x)?.to_f64()))),
    }
}

fn compare(a: &Val, r: Rel, b: &Val, ctx: &Formula) -> Result<bool, EvalError> {
    match (a, b) {
        (Val::Num(x), Val::Num(y)) => match x.cmp_num(y) {
            Some(o) => Ok(r.holds(o)),
            None => Err(EvalError::SortMismatch(format!("NaN in `{ctx}`"))),
        },
        _ if r == Rel::Eq => a.same(b).ok_or_else(|| EvalError::SortMismatch(format!("`{ctx}` compares {a} with {b}"))),
        _ => Err(EvalError::SortMismatch(format!("ordering on non-numbers in `{ctx}`"))),
    }
}

/// Evaluates a closed formula. A connective whose value is fixed by one operand (a false conjunct,
/// a true disjunct) is decided even if another operand is undefined.
pub fn eval_formula(f: &Formula, i: &Interpretation) -> Result<bool, EvalError> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Cmp(a, r, b) => compare(&eval_term(a, i)?, *r, &eval_term(b, i)?, f),
        Formula::Not(g) => Ok(!eval_formula(g, i)?),
        Formula::And(v) => decide(v.iter().map(|g| eval_formula(g, i)), false),
        Formula::Or(v) => decide(v.iter().map(|g| eval_formula(g, i)), true),
        Formula::Implies(a, b) => {
            let na = eval_formula(a, i).map(|x| !x);
            decide([na, eval_formula(b, i)].into_iter(), true)
        }
        Formula::Integral(_) | Formula::Dense(_) => Err(EvalError::Marker(f.to_string())),
    }
}

/// Short-circuit combination: returns `dominant` if any operand has it, otherwise the first error.
fn decide(it: impl Iterator<Item = Result<bool, EvalError>>, dominant: bool) -> Result<bool, EvalError> {
    let mut err = None;
    for r in it {
        match r {
            Ok(b) if b == dominant => return Ok(dominant),
            Ok(_) => {}
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok(!dominant),
    }
}

/// Simultaneous substitution of schematic variables.
pub fn substitute(f: &Formula, binding: &BTreeMap<String, Term>) -> Formula {
    f.transform_terms(&mut |t| match t {
        Term::Var(v) => binding.get(v).cloned(),
        _ => None,
    })
}

pub fn substitute_term(t: &Term, binding: &BTreeMap<String, Term>) -> Term {
    t.transform(&mut |s| match s {
        Term::Var(v) => binding.get(v).cloned(),
        _ => None,
    })
}

/// Time-stamps every unstamped constant occurrence with `step`.
pub fn stamp(f: &Formula, step: u32) -> Formula {
    f.transform_terms(&mut |t| stamp_one(t, step))
}

pub fn stamp_term(t: &Term, step: u32) -> Term {
    t.transform(&mut |s| stamp_one(s, step))
}

fn stamp_one(t: &Term, step: u32) -> Option<Term> {
    match t {
        Term::Const(c) if c.step.is_none() => Some(Term::Const(ConstRef {
            name: c.name.clone(),
            args: c.args.iter().map(|a| stamp_term(a, step)).collect(),
            step: Some(step),
        })),
        _ => None,
    }
}

/// Replaces constants by the literal values found in `values`.
pub fn fix_constants(f: &Formula, values: &BTreeMap<Stamped, Value>) -> Formula {
    f.transform_terms(&mut |t| match t {
        Term::Const(c) => {
            let args: Option<Vec<Value>> = c
                .args
                .iter()
                .map(|a| match a {
                    Term::Lit(v) => Some(v.clone()),
                    _ => None,
                })
                .collect();
            let s = Stamped { step: c.step, c: GroundConst { name: c.name.clone(), args: args? } };
            values.get(&s).map(|v| Term::Lit(v.clone()))
        }
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::value::{rat, ratio};

    fn i(pairs: &[(&str, i64)]) -> Interpretation {
        let mut it = Interpretation::new();
        for (k, v) in pairs {
            it.set(None, GroundConst::plain(*k), Val::exact(rat(*v)));
        }
        it
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let f = Formula::eq(Term::bin(ArithOp::Div, Term::constant("x"), Term::int(0)), Term::int(1));
        assert!(matches!(eval_formula(&f, &i(&[("x", 1)])), Err(EvalError::DivisionByZero(_))));
        // decided by the false conjunct
        let g = Formula::And(vec![Formula::False, f]);
        assert_eq!(eval_formula(&g, &i(&[("x", 1)])), Ok(false));
    }

    #[test]
    fn exact_comparison() {
        let f = Formula::cmp(
            Term::bin(ArithOp::Div, Term::constant("x"), Term::int(3)),
            Rel::Eq,
            Term::num(ratio(1, 3)),
        );
        assert_eq!(eval_formula(&f, &i(&[("x", 1)])), Ok(true));
    }
}
