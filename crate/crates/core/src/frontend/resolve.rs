//! Name resolution and sort checking from the syntax tree into the IR.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{ToPrimitive, Zero};

use crate::ir::formula::{ArithOp, ConstRef, Formula, Func, Rel, Term};
use crate::ir::law::{ActionDescription, CausalLaw, ModeRef, Program, QueryBlock, VarDecl};
use crate::ir::sort::{Category, ConstantDecl, Implicit, Sort, SortKind};
use crate::ir::value::{Rat, Value};

use super::lexer::{ErrorKind, ParseError, SourceSpan};
use super::syntax::{Expr, ExprKind, QueryItem, RawConst, RawLaw, RawObject, RawSort, Stmt};

type RResult<T> = Result<T, ParseError>;

fn err<T>(kind: ErrorKind, span: &SourceSpan, msg: impl Into<String>) -> RResult<T> {
    Err(ParseError::new(kind, span, msg))
}

/// Coarse type of a resolved term, used for sort checking.
#[derive(Clone, Debug, PartialEq)]
enum Ty {
    Bool,
    Num,
    /// Symbolic object of the named sort.
    Sym(String),
    Any,
}

fn ty_of_sort(s: &Sort) -> Ty {
    match &s.kind {
        SortKind::Boolean => Ty::Bool,
        SortKind::Enumeration(_) if s.is_numeric() => Ty::Num,
        SortKind::Enumeration(_) => Ty::Sym(s.name.clone()),
        _ => Ty::Num,
    }
}

fn compatible(a: &Ty, b: &Ty) -> bool {
    a == b || *a == Ty::Any || *b == Ty::Any
}

pub(crate) struct Resolver {
    sorts: Vec<Sort>,
    objects: BTreeMap<String, (Value, String)>,
    constants: Vec<ConstantDecl>,
    variables: Vec<VarDecl>,
    ode: bool,
}

impl Resolver {
    fn sort_by_name(&self, name: &str) -> Option<&Sort> {
        self.sorts.iter().find(|s| s.name == name)
    }

    fn constant(&self, name: &str) -> Option<&ConstantDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    fn variable(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn raw_sort(&self, s: &RawSort, span: &SourceSpan) -> RResult<Sort> {
        let sort = match s {
            RawSort::Named(n) => match self.sort_by_name(n) {
                Some(s) => s.clone(),
                None => return err(ErrorKind::Undeclared, span, format!("undeclared sort `{n}`")),
            },
            RawSort::Interval(lo, hi) | RawSort::Range(lo, hi) => Sort::interval(lo.clone(), hi.clone()),
            RawSort::Integer(lo, hi) => {
                let (Some(l), Some(h)) = (int_of(lo), int_of(hi)) else {
                    return err(ErrorKind::Sort, span, "integer range bounds must be integers");
                };
                Sort::integer_range(l, h)
            }
            RawSort::Real => Sort::real(),
            RawSort::NonNegReal => Sort::nonneg_real(),
            RawSort::Boolean => Sort::boolean(),
        };
        if let Err(m) = sort.validate() {
            return err(ErrorKind::Sort, span, m);
        }
        Ok(sort)
    }

    /// Declares sorts, objects, constants and variables from every section.
    fn declare(&mut self, stmts: &[Stmt]) -> RResult<()> {
        let mut sort_names: Vec<(String, SourceSpan)> = vec![];
        let mut members: BTreeMap<String, Vec<Value>> = BTreeMap::new();
        for s in stmts {
            if let Stmt::Sorts(names) = s {
                for (n, sp) in names {
                    if sort_names.iter().any(|(m, _)| m == n) || is_builtin_sort(n) {
                        return err(ErrorKind::Sort, sp, format!("sort `{n}` declared twice"));
                    }
                    sort_names.push((n.clone(), sp.clone()));
                }
            }
        }
        for s in stmts {
            if let Stmt::Objects(groups) = s {
                for (objs, sort, sp) in groups {
                    if !sort_names.iter().any(|(n, _)| n == sort) {
                        return err(ErrorKind::Undeclared, sp, format!("undeclared sort `{sort}`"));
                    }
                    let vals = members.entry(sort.clone()).or_default();
                    for o in objs {
                        match o {
                            RawObject::Name(n) => {
                                if self.objects.contains_key(n) {
                                    return err(ErrorKind::Sort, sp, format!("object `{n}` declared twice"));
                                }
                                self.objects.insert(n.clone(), (Value::Sym(n.clone()), sort.clone()));
                                vals.push(Value::Sym(n.clone()));
                            }
                            RawObject::Int(r) => vals.push(Value::Num(r.clone())),
                            RawObject::Range(lo, hi) => {
                                let (Some(l), Some(h)) = (int_of(lo), int_of(hi)) else {
                                    return err(ErrorKind::Sort, sp, "object range bounds must be integers");
                                };
                                vals.extend((l..=h).map(Value::int));
                            }
                        }
                    }
                }
            }
        }
        for (n, sp) in &sort_names {
            let sort = Sort::enumeration(n.clone(), members.remove(n).unwrap_or_default());
            if let Err(m) = sort.validate() {
                return err(ErrorKind::Sort, sp, m);
            }
            self.sorts.push(sort);
        }
        for s in stmts {
            if let Stmt::Constants(cs) = s {
                for c in cs {
                    let decl = self.constant_decl(c)?;
                    if self.constant(&decl.name).is_some() {
                        return err(ErrorKind::Sort, &c.span, format!("constant `{}` declared twice", decl.name));
                    }
                    self.constants.push(decl);
                }
            }
        }
        for s in stmts {
            if let Stmt::Variables(groups) = s {
                for (names, sort, sp) in groups {
                    let sort = match sort {
                        Some(r) => self.raw_sort(r, sp)?,
                        None => Sort::real(),
                    };
                    for n in names {
                        if self.variable(n).is_some() {
                            return err(ErrorKind::Sort, sp, format!("variable `{n}` declared twice"));
                        }
                        self.variables.push(VarDecl { name: n.clone(), sort: sort.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    fn constant_decl(&self, c: &RawConst) -> RResult<ConstantDecl> {
        let mut sort = match &c.sort {
            Some(s) => self.raw_sort(s, &c.span)?,
            None => Sort::boolean(),
        };
        if c.name == "mode" {
            sort = coerce_mode_sort(sort);
        }
        let (category, implicit) = match c.kind.as_str() {
            "simpleFluent" => (Category::SimpleFluent, None),
            "inertialFluent" => (Category::SimpleFluent, Some(Implicit::Inertial)),
            "sdFluent" | "staticFluent" => (Category::StaticFluent, None),
            "differentiableFluent" | "continuousFluent" => (Category::DifferentiableFluent, Some(Implicit::Exogenous)),
            "action" => (Category::Action, None),
            "exogenousAction" => (Category::Action, Some(Implicit::Exogenous)),
            k => return err(ErrorKind::Syntax, &c.span, format!("unknown constant kind `{k}`")),
        };
        let mut args = vec![];
        for a in &c.arg_sorts {
            match self.sort_by_name(a) {
                Some(s) => args.push(s.clone()),
                None => return err(ErrorKind::Undeclared, &c.span, format!("undeclared sort `{a}`")),
            }
        }
        let decl = ConstantDecl { name: c.name.clone(), args, sort, category, implicit };
        if let Err(m) = decl.validate() {
            return err(ErrorKind::Sort, &c.span, m);
        }
        Ok(decl)
    }

    /// Implicit `mode`, `wait` and `duration` declarations of ODE descriptions.
    fn declare_ode_implicits(&mut self, stmts: &[Stmt]) {
        if self.constant("mode").is_none() {
            let mut ints = BTreeSet::new();
            for s in stmts {
                match s {
                    Stmt::Law(l, _) => law_exprs(l).into_iter().for_each(|e| mode_ints(e, &mut ints)),
                    Stmt::Query(items, _) => items.iter().for_each(|i| {
                        if let QueryItem::Formula(e) = i {
                            mode_ints(e, &mut ints)
                        }
                    }),
                    _ => {}
                }
            }
            let lo = ints.first().copied().unwrap_or(1);
            let hi = ints.last().copied().unwrap_or(lo);
            self.constants.push(
                ConstantDecl::new("mode", Sort::integer_range(lo, hi), Category::SimpleFluent)
                    .with_implicit(Implicit::Inertial),
            );
        }
        if self.constant("wait").is_none() {
            self.constants.push(ConstantDecl::new("wait", Sort::boolean(), Category::Action));
        }
        if self.constant("duration").is_none() {
            self.constants.push(
                ConstantDecl::new("duration", Sort::nonneg_real(), Category::Action).with_implicit(Implicit::Exogenous),
            );
        }
    }

    /// Resolves an expression in term position. `step` is the enclosing time stamp.
    fn term(&self, e: &Expr, step: Option<u32>, stamps_ok: bool) -> RResult<Term> {
        match &e.kind {
            ExprKind::Num(r) => Ok(Term::num(r.clone())),
            ExprKind::Primed(v) => Ok(Term::Primed(v.clone())),
            ExprKind::Neg(x) => Ok(Term::neg(self.term(x, step, stamps_ok)?)),
            ExprKind::Arith(op, a, b) => {
                let a = self.term(a, step, stamps_ok)?;
                let b = self.term(b, step, stamps_ok)?;
                for t in [&a, &b] {
                    if !compatible(&self.ty(t), &Ty::Num) {
                        return err(ErrorKind::Sort, &e.span, format!("arithmetic on non-numeric term `{t}`"));
                    }
                }
                if *op == ArithOp::Div && b.is_literal() {
                    if let Term::Lit(Value::Num(d)) = &b {
                        if d.is_zero() {
                            return err(ErrorKind::Sort, &e.span, "division by zero");
                        }
                    }
                }
                let t = Term::bin(*op, a, b);
                Ok(if let Term::Bin(_, x, y) = &t {
                    if x.is_literal() && y.is_literal() {
                        t.simplify()
                    } else {
                        t
                    }
                } else {
                    t
                })
            }
            ExprKind::Stamp(i, x) => {
                if !stamps_ok {
                    return err(ErrorKind::Syntax, &e.span, "time stamps are only allowed in query blocks");
                }
                self.term(x, Some(*i), stamps_ok)
            }
            ExprKind::Ident(name, args) => self.ident_term(name, args, &e.span, step, stamps_ok),
            _ => err(ErrorKind::Sort, &e.span, "expected a term, found a formula"),
        }
    }

    fn ident_term(&self, name: &str, args: &[Expr], span: &SourceSpan, step: Option<u32>, stamps_ok: bool) -> RResult<Term> {
        if let Some(decl) = self.constant(name).or_else(|| self.alias(name)) {
            if args.len() != decl.args.len() {
                return err(
                    ErrorKind::Arity,
                    span,
                    format!("`{name}` expects {} argument(s), found {}", decl.args.len(), args.len()),
                );
            }
            let mut targs = vec![];
            for (a, s) in args.iter().zip(&decl.args) {
                let t = self.term(a, step, stamps_ok)?;
                if let Term::Param(n) = &t {
                    return err(ErrorKind::Undeclared, &a.span, format!("undeclared object `{n}` of sort {s}"));
                }
                if let Term::Lit(v) = &t {
                    if !s.contains(v) {
                        return err(ErrorKind::Sort, &a.span, format!("`{v}` is not of sort {s}"));
                    }
                } else if !compatible(&self.ty(&t), &ty_of_sort(s)) {
                    return err(ErrorKind::Sort, &a.span, format!("argument `{t}` is not of sort {s}"));
                }
                targs.push(t);
            }
            return Ok(Term::Const(ConstRef { name: decl.name.clone(), args: targs, step }));
        }
        if !args.is_empty() {
            if let Some(f) = Func::lookup(name) {
                if args.len() != 1 {
                    return err(ErrorKind::Arity, span, format!("`{name}` expects 1 argument"));
                }
                let x = self.term(&args[0], step, stamps_ok)?;
                if !compatible(&self.ty(&x), &Ty::Num) {
                    return err(ErrorKind::Sort, span, format!("`{name}` applied to non-numeric term"));
                }
                return Ok(Term::Func(f, Box::new(x)));
            }
            return err(ErrorKind::Undeclared, span, format!("undeclared constant `{name}`"));
        }
        if self.variable(name).is_some() {
            return Ok(Term::var(name));
        }
        if let Some((v, _)) = self.objects.get(name) {
            return Ok(Term::Lit(v.clone()));
        }
        match name {
            "true" => return Ok(Term::Lit(Value::Bool(true))),
            "false" => return Ok(Term::Lit(Value::Bool(false))),
            "pi" => return Ok(Term::Pi),
            _ => {}
        }
        if name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Ok(Term::Param(name.to_string()));
        }
        err(ErrorKind::Undeclared, span, format!("undeclared identifier `{name}`"))
    }

    /// `dur` abbreviates `duration` in ODE descriptions.
    fn alias(&self, name: &str) -> Option<&ConstantDecl> {
        if self.ode && name == "dur" {
            self.constant("duration")
        } else {
            None
        }
    }

    fn ty(&self, t: &Term) -> Ty {
        match t {
            Term::Lit(Value::Bool(_)) => Ty::Bool,
            Term::Lit(Value::Num(_)) | Term::Pi | Term::Neg(_) | Term::Bin(..) | Term::Func(..) | Term::Primed(_) => {
                Ty::Num
            }
            Term::Lit(Value::Sym(s)) => match self.objects.get(s) {
                Some((_, sort)) => Ty::Sym(sort.clone()),
                None => Ty::Any,
            },
            Term::Var(v) => self.variable(v).map(|d| ty_of_sort(&d.sort)).unwrap_or(Ty::Any),
            Term::Param(_) => Ty::Any,
            Term::Const(c) => self.constant(&c.name).map(|d| ty_of_sort(&d.sort)).unwrap_or(Ty::Any),
        }
    }

    fn sort_of(&self, t: &Term) -> Option<&Sort> {
        match t {
            Term::Const(c) => self.constant(&c.name).map(|d| &d.sort),
            Term::Var(v) => self.variable(v).map(|d| &d.sort),
            _ => None,
        }
    }

    /// Resolves an expression in formula position.
    fn formula(&self, e: &Expr, step: Option<u32>, stamps_ok: bool) -> RResult<Formula> {
        match &e.kind {
            ExprKind::And(v) => {
                Ok(Formula::And(v.iter().map(|x| self.formula(x, step, stamps_ok)).collect::<RResult<_>>()?))
            }
            ExprKind::Or(v) => {
                Ok(Formula::Or(v.iter().map(|x| self.formula(x, step, stamps_ok)).collect::<RResult<_>>()?))
            }
            ExprKind::Implies(a, b) => {
                Ok(Formula::implies(self.formula(a, step, stamps_ok)?, self.formula(b, step, stamps_ok)?))
            }
            ExprKind::Neg(x) => Ok(Formula::not(self.formula(x, step, stamps_ok)?)),
            ExprKind::Tilde(x) => match &x.kind {
                ExprKind::Ident(..) | ExprKind::Stamp(..) => {
                    let t = self.term(x, step, stamps_ok)?;
                    self.bool_atom(t, false, &x.span)
                }
                _ => Ok(Formula::not(self.formula(x, step, stamps_ok)?)),
            },
            ExprKind::Cmp(r, a, b) => self.comparison(*r, a, b, &e.span, step, stamps_ok),
            ExprKind::Ne(a, b) => Ok(Formula::not(self.comparison(Rel::Eq, a, b, &e.span, step, stamps_ok)?)),
            ExprKind::Stamp(i, x) => {
                if !stamps_ok {
                    return err(ErrorKind::Syntax, &e.span, "time stamps are only allowed in query blocks");
                }
                self.formula(x, Some(*i), stamps_ok)
            }
            ExprKind::Ident(name, args) => {
                if args.is_empty() {
                    match name.as_str() {
                        "true" => return Ok(Formula::True),
                        "false" => return Ok(Formula::False),
                        _ => {}
                    }
                }
                if self.constant(name).is_none() && self.alias(name).is_none() {
                    return err(ErrorKind::Undeclared, &e.span, format!("undeclared identifier `{name}`"));
                }
                let t = self.ident_term(name, args, &e.span, step, stamps_ok)?;
                self.bool_atom(t, true, &e.span)
            }
            ExprKind::Num(_) | ExprKind::Primed(_) | ExprKind::Arith(..) => {
                err(ErrorKind::Sort, &e.span, "expected a formula, found a term")
            }
        }
    }

    fn bool_atom(&self, t: Term, value: bool, span: &SourceSpan) -> RResult<Formula> {
        if self.ty(&t) != Ty::Bool {
            return err(ErrorKind::Sort, span, format!("`{t}` is not boolean"));
        }
        Ok(Formula::eq(t, Term::Lit(Value::Bool(value))))
    }

    fn comparison(
        &self,
        r: Rel,
        a: &Expr,
        b: &Expr,
        span: &SourceSpan,
        step: Option<u32>,
        stamps_ok: bool,
    ) -> RResult<Formula> {
        let ta = self.term(a, step, stamps_ok)?;
        let tb = self.term(b, step, stamps_ok)?;
        let (ya, yb) = (self.ty(&ta), self.ty(&tb));
        if !compatible(&ya, &yb) {
            return err(ErrorKind::Sort, span, format!("cannot compare `{ta}` with `{tb}`"));
        }
        if r != Rel::Eq && (ya == Ty::Bool || matches!(ya, Ty::Sym(_)) || yb == Ty::Bool || matches!(yb, Ty::Sym(_))) {
            return err(ErrorKind::Sort, span, format!("ordering comparison on non-numeric `{ta}`"));
        }
        if r == Rel::Eq {
            for (x, y) in [(&ta, &tb), (&tb, &ta)] {
                if let (Some(s), Term::Lit(v)) = (self.sort_of(x), y) {
                    if s.is_finite() && !s.contains(v) {
                        return err(ErrorKind::Sort, span, format!("`{v}` is not a value of sort {s}"));
                    }
                }
            }
        }
        Ok(Formula::cmp(ta, r, tb))
    }

    fn opt(&self, e: &Option<Expr>) -> RResult<Formula> {
        match e {
            Some(e) => self.formula(e, None, false),
            None => Ok(Formula::True),
        }
    }

    fn has_action(&self, f: &Formula) -> bool {
        f.constants().iter().any(|c| self.constant(&c.name).is_some_and(|d| d.category == Category::Action))
    }

    fn const_ref(&self, e: &Expr) -> RResult<ConstRef> {
        match self.term(e, None, false)? {
            Term::Const(c) => Ok(c),
            t => err(ErrorKind::Sort, &e.span, format!("expected a constant, found `{t}`")),
        }
    }

    fn mode_ref(&self, e: &Expr) -> RResult<ModeRef> {
        if let ExprKind::Cmp(Rel::Eq, a, b) = &e.kind {
            if matches!(&a.kind, ExprKind::Ident(n, args) if n == "mode" && args.is_empty()) {
                let f = self.comparison(Rel::Eq, a, b, &e.span, None, false)?;
                if let Formula::Cmp(_, _, t) = f {
                    match t {
                        Term::Lit(v) => return Ok(ModeRef::Value(v)),
                        Term::Var(v) => return Ok(ModeRef::Var(v)),
                        _ => {}
                    }
                }
            }
        }
        err(ErrorKind::Syntax, &e.span, "expected `mode = value`")
    }

    /// Returns `None` for an `exogenous`/`inertial` law already implied by the declaration.
    fn law(&self, l: &RawLaw, span: &SourceSpan) -> RResult<Option<CausalLaw>> {
        Ok(Some(match l {
            RawLaw::Caused { head, if_, after } => {
                let head = self.formula(head, None, false)?;
                let g = self.opt(if_)?;
                match after {
                    Some(h) => CausalLaw::FluentDynamic { head, if_: g, after: self.formula(h, None, false)? },
                    None if self.has_action(&head) || self.has_action(&g) => CausalLaw::ActionDynamic { head, if_: g },
                    None => CausalLaw::Static { head, if_: g },
                }
            }
            RawLaw::Constraint { f, after } => CausalLaw::Constraint {
                f: self.formula(f, None, false)?,
                after: after.as_ref().map(|a| self.formula(a, None, false)).transpose()?,
            },
            RawLaw::Nonexecutable { f, if_ } => {
                CausalLaw::Nonexecutable { f: self.formula(f, None, false)?, if_: self.opt(if_)? }
            }
            RawLaw::Causes { cause, effect, if_ } => CausalLaw::Causes {
                cause: self.formula(cause, None, false)?,
                effect: self.formula(effect, None, false)?,
                if_: self.opt(if_)?,
            },
            RawLaw::Default { f, if_, after } => CausalLaw::Default {
                f: self.formula(f, None, false)?,
                if_: self.opt(if_)?,
                after: after.as_ref().map(|a| self.formula(a, None, false)).transpose()?,
            },
            RawLaw::Exogenous { c, if_ } | RawLaw::Inertial { c, if_ } => {
                let kind = if matches!(l, RawLaw::Exogenous { .. }) { Implicit::Exogenous } else { Implicit::Inertial };
                let c = self.const_ref(c)?;
                let decl = self.constant(&c.name).expect("resolved constant");
                let generic = c.args.iter().all(|a| matches!(a, Term::Var(_)));
                if if_.is_none() && generic && decl.implicit == Some(kind) {
                    return Ok(None);
                }
                let if_ = self.opt(if_)?;
                match kind {
                    Implicit::Exogenous => CausalLaw::Exogenous { c, if_ },
                    Implicit::Inertial => CausalLaw::Inertial { c, if_ },
                }
            }
            RawLaw::Rate { fluent, rhs, mode } => {
                let c = self.const_ref(fluent)?;
                if self.constant(&c.name).map(|d| d.category) != Some(Category::DifferentiableFluent) {
                    return err(ErrorKind::Sort, span, format!("`{}` is not a differentiable fluent", c.name));
                }
                let rhs = self.term(rhs, None, false)?;
                if !compatible(&self.ty(&rhs), &Ty::Num) {
                    return err(ErrorKind::Sort, span, "derivative must be numeric");
                }
                CausalLaw::Rate { fluent: c, rhs, mode: self.mode_ref(mode)? }
            }
            RawLaw::AlwaysT { body, mode } => {
                CausalLaw::AlwaysT { body: self.formula(body, None, false)?, mode: self.mode_ref(mode)? }
            }
        }))
    }

    fn query(&self, items: &[QueryItem], span: &SourceSpan) -> RResult<QueryBlock> {
        let mut label = None;
        let mut maxstep = None;
        let mut constraints = vec![];
        for i in items {
            match i {
                QueryItem::Label(l) => label = Some(l.clone()),
                QueryItem::Maxstep(m) => maxstep = Some(*m),
                QueryItem::Formula(e) => {
                    let f = self.formula(e, None, true)?;
                    if f.constants().iter().any(|c| c.step.is_none()) {
                        return err(ErrorKind::Syntax, &e.span, "query constants need a time stamp `i:`");
                    }
                    if let Some(m) = maxstep {
                        if f.constants().iter().any(|c| c.step.is_some_and(|s| s > m)) {
                            return err(ErrorKind::Syntax, &e.span, format!("time stamp exceeds maxstep {m}"));
                        }
                    }
                    constraints.push(f);
                }
            }
        }
        let Some(label) = label else {
            return err(ErrorKind::Syntax, span, "query block without `label ::`");
        };
        Ok(QueryBlock { label, maxstep, constraints })
    }
}

fn is_builtin_sort(n: &str) -> bool {
    matches!(n, "boolean" | "real" | "nonnegReal" | "integer")
}

fn int_of(r: &Rat) -> Option<i64> {
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}

/// A `mode` constant over an integer-bounded real interval ranges over those integers.
fn coerce_mode_sort(s: Sort) -> Sort {
    if let SortKind::Interval(lo, hi) = &s.kind {
        if let (Some(l), Some(h)) = (int_of(lo), int_of(hi)) {
            return Sort::enumeration(s.name.clone(), (l..=h).map(Value::int).collect());
        }
    }
    s
}

fn law_exprs(l: &RawLaw) -> Vec<&Expr> {
    let mut v: Vec<&Expr> = vec![];
    match l {
        RawLaw::Caused { head, if_, after } => {
            v.push(head);
            v.extend(if_.iter());
            v.extend(after.iter());
        }
        RawLaw::Constraint { f, after } => {
            v.push(f);
            v.extend(after.iter());
        }
        RawLaw::Nonexecutable { f, if_ } => {
            v.push(f);
            v.extend(if_.iter());
        }
        RawLaw::Causes { cause, effect, if_ } => {
            v.push(cause);
            v.push(effect);
            v.extend(if_.iter());
        }
        RawLaw::Default { f, if_, after } => {
            v.push(f);
            v.extend(if_.iter());
            v.extend(after.iter());
        }
        RawLaw::Exogenous { if_, .. } | RawLaw::Inertial { if_, .. } => v.extend(if_.iter()),
        RawLaw::Rate { mode, .. } => v.push(mode),
        RawLaw::AlwaysT { body, mode } => {
            v.push(body);
            v.push(mode);
        }
    }
    v
}

/// Collects integer literals `n` from atoms `mode = n`.
fn mode_ints(e: &Expr, out: &mut BTreeSet<i64>) {
    fn is_mode(e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Ident(n, a) => n == "mode" && a.is_empty(),
            ExprKind::Stamp(_, x) => is_mode(x),
            _ => false,
        }
    }
    match &e.kind {
        ExprKind::Cmp(Rel::Eq, a, b) | ExprKind::Ne(a, b) => {
            for (x, y) in [(a, b), (b, a)] {
                if is_mode(x) {
                    if let ExprKind::Num(r) = &y.kind {
                        if let Some(n) = int_of(r) {
                            out.insert(n);
                        }
                    }
                }
            }
        }
        ExprKind::And(v) | ExprKind::Or(v) => v.iter().for_each(|x| mode_ints(x, out)),
        ExprKind::Implies(a, b) => {
            mode_ints(a, out);
            mode_ints(b, out);
        }
        ExprKind::Neg(x) | ExprKind::Tilde(x) | ExprKind::Stamp(_, x) => mode_ints(x, out),
        _ => {}
    }
}

/// Resolves parsed statements into a program.
pub(crate) fn resolve(stmts: &[Stmt]) -> RResult<Program> {
    let mut r = Resolver { sorts: vec![], objects: BTreeMap::new(), constants: vec![], variables: vec![], ode: false };
    r.declare(stmts)?;
    r.ode = r.constants.iter().any(|c| c.category == Category::DifferentiableFluent)
        || stmts.iter().any(|s| matches!(s, Stmt::Law(RawLaw::Rate { .. } | RawLaw::AlwaysT { .. }, _)));
    if r.ode {
        r.declare_ode_implicits(stmts);
    }
    let mut laws = vec![];
    let mut queries: Vec<QueryBlock> = vec![];
    for s in stmts {
        match s {
            Stmt::Law(l, sp) => {
                if let Some(law) = r.law(l, sp)? {
                    laws.push(law);
                }
            }
            Stmt::Query(items, sp) => {
                let q = r.query(items, sp)?;
                if queries.iter().any(|p| p.label == q.label) {
                    return err(ErrorKind::Syntax, sp, format!("duplicate query label `{}`", q.label));
                }
                queries.push(q);
            }
            _ => {}
        }
    }
    let Resolver { sorts, constants, variables, .. } = r;
    Ok(Program { description: ActionDescription { sorts, constants, variables, laws }, queries })
}

impl Resolver {
    /// A scope for standalone expressions, such as automaton labels.
    pub(crate) fn standalone(constants: Vec<ConstantDecl>, variables: Vec<VarDecl>, objects: &[(Value, String)]) -> Resolver {
        let objects = objects
            .iter()
            .filter_map(|(v, s)| match v {
                Value::Sym(n) => Some((n.clone(), (v.clone(), s.clone()))),
                _ => None,
            })
            .collect();
        Resolver { sorts: vec![], objects, constants, variables, ode: false }
    }

    pub(crate) fn resolve_formula(&self, e: &Expr, stamps_ok: bool) -> RResult<Formula> {
        self.formula(e, None, stamps_ok)
    }

    pub(crate) fn resolve_term(&self, e: &Expr) -> RResult<Term> {
        self.term(e, None, false)
    }
}
