use std::collections::BTreeSet;
use std::fmt;

use super::value::{exact_decimal, Rat, Value};
use num_traits::Zero;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Background functions with a numeric interpretation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
}

pub struct Background {
    pub name: &'static str,
    pub func: Func,
    pub eval: fn(f64) -> f64,
}

/// Registry of background functions known to the parser, evaluator and emitter.
pub const BACKGROUND: &[Background] = &[
    Background { name: "sin", func: Func::Sin, eval: f64::sin },
    Background { name: "cos", func: Func::Cos, eval: f64::cos },
    Background { name: "tan", func: Func::Tan, eval: f64::tan },
    Background { name: "exp", func: Func::Exp, eval: f64::exp },
];

impl Func {
    pub fn lookup(name: &str) -> Option<Func> {
        BACKGROUND.iter().find(|b| b.name == name).map(|b| b.func)
    }

    fn entry(self) -> &'static Background {
        BACKGROUND.iter().find(|b| b.func == self).expect("registered")
    }

    pub fn name(self) -> &'static str {
        self.entry().name
    }

    pub fn apply(self, x: f64) -> f64 {
        (self.entry().eval)(x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstRef {
    pub name: String,
    pub args: Vec<Term>,
    pub step: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Lit(Value),
    /// Schematic variable (upper-case identifier).
    Var(String),
    /// Symbolic constant supplied on the command line (`-c w1=7.5`).
    Param(String),
    Const(ConstRef),
    /// `x'` in automaton formulas: derivative in flows, post-state in resets.
    Primed(String),
    Pi,
    Neg(Box<Term>),
    Bin(ArithOp, Box<Term>, Box<Term>),
    Func(Func, Box<Term>),
}

impl Term {
    pub fn num(r: Rat) -> Term {
        Term::Lit(Value::Num(r))
    }

    pub fn int(n: i64) -> Term {
        Term::Lit(Value::int(n))
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(ConstRef { name: name.into(), args: vec![], step: None })
    }

    pub fn stamped(name: impl Into<String>, step: u32) -> Term {
        Term::Const(ConstRef { name: name.into(), args: vec![], step: Some(step) })
    }

    pub fn bin(op: ArithOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn neg(t: Term) -> Term {
        match t {
            Term::Lit(Value::Num(r)) => Term::num(-r),
            t => Term::Neg(Box::new(t)),
        }
    }

    /// Rebuilds the term bottom-up; `f` may replace any sub-term (replacements are not revisited).
    pub fn transform(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        match self {
            Term::Const(c) => Term::Const(ConstRef {
                name: c.name.clone(),
                args: c.args.iter().map(|a| a.transform(f)).collect(),
                step: c.step,
            }),
            Term::Neg(t) => Term::Neg(Box::new(t.transform(f))),
            Term::Bin(op, a, b) => Term::Bin(*op, Box::new(a.transform(f)), Box::new(b.transform(f))),
            Term::Func(g, t) => Term::Func(*g, Box::new(t.transform(f))),
            t => t.clone(),
        }
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Term)) {
        f(self);
        match self {
            Term::Const(c) => c.args.iter().for_each(|a| a.visit(f)),
            Term::Neg(t) | Term::Func(_, t) => t.visit(f),
            Term::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn mentions_var(&self, v: &str) -> bool {
        let mut found = false;
        self.visit(&mut |t| {
            if matches!(t, Term::Var(n) if n == v) {
                found = true;
            }
        });
        found
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Lit(_))
    }

    /// Folds arithmetic over exact literals.
    pub fn simplify(&self) -> Term {
        match self {
            Term::Neg(t) => Term::neg(t.simplify()),
            Term::Bin(op, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if let (Term::Lit(Value::Num(x)), Term::Lit(Value::Num(y))) = (&a, &b) {
                    match op {
                        ArithOp::Add => return Term::num(x + y),
                        ArithOp::Sub => return Term::num(x - y),
                        ArithOp::Mul => return Term::num(x * y),
                        ArithOp::Div if !y.is_zero() => return Term::num(x / y),
                        ArithOp::Div => {}
                    }
                }
                Term::bin(*op, a, b)
            }
            Term::Func(g, t) => Term::Func(*g, Box::new(t.simplify())),
            Term::Const(c) => Term::Const(ConstRef {
                name: c.name.clone(),
                args: c.args.iter().map(Term::simplify).collect(),
                step: c.step,
            }),
            t => t.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    pub fn holds(self, o: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Rel::Eq => o == Equal,
            Rel::Lt => o == Less,
            Rel::Le => o != Greater,
            Rel::Gt => o == Greater,
            Rel::Ge => o != Less,
        }
    }

    /// Relation with sides swapped: `a < b` iff `b > a`.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Eq => Rel::Eq,
            Rel::Lt => Rel::Gt,
            Rel::Le => Rel::Ge,
            Rel::Gt => Rel::Lt,
            Rel::Ge => Rel::Le,
        }
    }
}

/// `X(t) = X(0) + ∫_0^δ flow_v dt`: post-state `targets` from pre-state `sources` over `duration` in `mode`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegralMarker {
    pub mode: Value,
    pub targets: Vec<Term>,
    pub sources: Vec<Term>,
    pub duration: Term,
}

/// `∀t ∈ [0, δ]`: `body` holds along the trajectory of `mode`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DenseMarker {
    pub mode: Value,
    pub body: Box<Formula>,
    pub duration: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(Term, Rel, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Integral(IntegralMarker),
    Dense(DenseMarker),
}

impl Formula {
    pub fn cmp(a: Term, r: Rel, b: Term) -> Formula {
        Formula::Cmp(a, r, b)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Cmp(a, Rel::Eq, b)
    }

    /// `c = true` for a boolean constant term.
    pub fn holds(c: Term) -> Formula {
        Formula::Cmp(c, Rel::Eq, Term::Lit(Value::Bool(true)))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(mut v: Vec<Formula>) -> Formula {
        match v.len() {
            0 => Formula::True,
            1 => v.pop().unwrap(),
            _ => Formula::And(v),
        }
    }

    pub fn or(mut v: Vec<Formula>) -> Formula {
        match v.len() {
            0 => Formula::False,
            1 => v.pop().unwrap(),
            _ => Formula::Or(v),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn transform_terms(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(a, r, b) => Formula::Cmp(a.transform(f), *r, b.transform(f)),
            Formula::Not(g) => Formula::Not(Box::new(g.transform_terms(f))),
            Formula::And(v) => Formula::And(v.iter().map(|g| g.transform_terms(f)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| g.transform_terms(f)).collect()),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.transform_terms(f)), Box::new(b.transform_terms(f))),
            Formula::Integral(m) => Formula::Integral(IntegralMarker {
                mode: m.mode.clone(),
                targets: m.targets.iter().map(|t| t.transform(f)).collect(),
                sources: m.sources.iter().map(|t| t.transform(f)).collect(),
                duration: m.duration.transform(f),
            }),
            Formula::Dense(m) => Formula::Dense(DenseMarker {
                mode: m.mode.clone(),
                body: Box::new(m.body.transform_terms(f)),
                duration: m.duration.transform(f),
            }),
        }
    }

    pub fn visit_terms<'a>(&'a self, f: &mut dyn FnMut(&'a Term)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(a, _, b) => {
                a.visit(f);
                b.visit(f);
            }
            Formula::Not(g) => g.visit_terms(f),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| g.visit_terms(f)),
            Formula::Implies(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            Formula::Integral(m) => {
                m.targets.iter().chain(&m.sources).for_each(|t| t.visit(f));
                m.duration.visit(f);
            }
            Formula::Dense(m) => {
                m.body.visit_terms(f);
                m.duration.visit(f);
            }
        }
    }

    /// Constant occurrences, in traversal order.
    pub fn constants(&self) -> Vec<&ConstRef> {
        let mut out = vec![];
        self.visit_terms(&mut |t| {
            if let Term::Const(c) = t {
                out.push(c);
            }
        });
        out
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            if let Term::Var(v) = t {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            if let Term::Param(v) = t {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn has_marker(&self) -> bool {
        match self {
            Formula::Integral(_) | Formula::Dense(_) => true,
            Formula::Not(g) => g.has_marker(),
            Formula::And(v) | Formula::Or(v) => v.iter().any(Formula::has_marker),
            Formula::Implies(a, b) => a.has_marker() || b.has_marker(),
            _ => false,
        }
    }

    /// Top-level conjuncts (a non-conjunction is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(v) => v.iter().flat_map(|g| g.conjuncts()).collect(),
            Formula::True => vec![],
            f => vec![f],
        }
    }

    /// Boolean and literal-arithmetic simplification; flattens nested connectives.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(a, r, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if a == b && !contains_div(&a) {
                    return if matches!(r, Rel::Eq | Rel::Le | Rel::Ge) { Formula::True } else { Formula::False };
                }
                if let (Term::Lit(x), Term::Lit(y)) = (&a, &b) {
                    match (x, y) {
                        (Value::Num(p), Value::Num(q)) => return bool_formula(r.holds(p.cmp(q))),
                        _ if *r == Rel::Eq => return bool_formula(x == y),
                        _ => {}
                    }
                }
                Formula::Cmp(a, *r, b)
            }
            Formula::Not(g) => match g.simplify() {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                Formula::Not(h) => *h,
                h => Formula::not(h),
            },
            Formula::And(v) => {
                let mut out = vec![];
                for g in v {
                    match g.simplify() {
                        Formula::True => {}
                        Formula::False => return Formula::False,
                        Formula::And(w) => out.extend(w),
                        h => out.push(h),
                    }
                }
                Formula::and(out)
            }
            Formula::Or(v) => {
                let mut out = vec![];
                for g in v {
                    match g.simplify() {
                        Formula::False => {}
                        Formula::True => return Formula::True,
                        Formula::Or(w) => out.extend(w),
                        h => out.push(h),
                    }
                }
                Formula::or(out)
            }
            Formula::Implies(a, b) => match (a.simplify(), b.simplify()) {
                (Formula::False, _) | (_, Formula::True) => Formula::True,
                (Formula::True, b) => b,
                (a, Formula::False) => Formula::not(a).simplify(),
                (a, b) => Formula::implies(a, b),
            },
            Formula::Integral(m) => Formula::Integral(IntegralMarker {
                mode: m.mode.clone(),
                targets: m.targets.iter().map(Term::simplify).collect(),
                sources: m.sources.iter().map(Term::simplify).collect(),
                duration: m.duration.simplify(),
            }),
            Formula::Dense(m) => Formula::Dense(DenseMarker {
                mode: m.mode.clone(),
                body: Box::new(m.body.simplify()),
                duration: m.duration.simplify(),
            }),
        }
    }

    /// Negation normal form; `¬(a = b)` stays as a negated atom.
    pub fn nnf(&self) -> Formula {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Formula {
        match self {
            Formula::True => bool_formula(pos),
            Formula::False => bool_formula(!pos),
            Formula::Not(g) => g.nnf_pol(!pos),
            Formula::And(v) => {
                let w = v.iter().map(|g| g.nnf_pol(pos)).collect();
                if pos { Formula::And(w) } else { Formula::Or(w) }
            }
            Formula::Or(v) => {
                let w = v.iter().map(|g| g.nnf_pol(pos)).collect();
                if pos { Formula::Or(w) } else { Formula::And(w) }
            }
            Formula::Implies(a, b) => {
                if pos {
                    Formula::Or(vec![a.nnf_pol(false), b.nnf_pol(true)])
                } else {
                    Formula::And(vec![a.nnf_pol(true), b.nnf_pol(false)])
                }
            }
            Formula::Cmp(a, r, b) => {
                if pos {
                    self.clone()
                } else {
                    match r {
                        Rel::Eq => Formula::not(self.clone()),
                        Rel::Lt => Formula::Cmp(a.clone(), Rel::Ge, b.clone()),
                        Rel::Le => Formula::Cmp(a.clone(), Rel::Gt, b.clone()),
                        Rel::Gt => Formula::Cmp(a.clone(), Rel::Le, b.clone()),
                        Rel::Ge => Formula::Cmp(a.clone(), Rel::Lt, b.clone()),
                    }
                }
            }
            m => {
                if pos {
                    m.clone()
                } else {
                    Formula::not(m.clone())
                }
            }
        }
    }
}

fn contains_div(t: &Term) -> bool {
    let mut d = false;
    t.visit(&mut |s| {
        if matches!(s, Term::Bin(ArithOp::Div, ..)) {
            d = true;
        }
    });
    d
}

fn bool_formula(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

// Printing in the `.cp` surface syntax. Levels: 1 `->>`, 2 `++`, 3 `&`, 4 comparison,
// 5 negation, 6 `+ -`, 7 `* //`, 8 unary minus, 9 primary.

fn term_level(t: &Term) -> u8 {
    match t {
        Term::Bin(ArithOp::Add | ArithOp::Sub, ..) => 6,
        Term::Bin(..) => 7,
        Term::Neg(_) => 8,
        Term::Lit(Value::Num(r)) if exact_decimal(r).is_none() => 7,
        Term::Lit(Value::Num(r)) if r < &Rat::zero() => 8,
        _ => 9,
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, min: u8) -> fmt::Result {
    let paren = term_level(t) < min;
    if paren {
        f.write_str("(")?;
    }
    match t {
        Term::Lit(Value::Num(r)) => match exact_decimal(r) {
            Some(s) => f.write_str(&s)?,
            None => write!(f, "{}//{}", r.numer(), r.denom())?,
        },
        Term::Lit(v) => write!(f, "{v}")?,
        Term::Var(v) | Term::Param(v) => f.write_str(v)?,
        Term::Primed(v) => write!(f, "{v}'")?,
        Term::Pi => f.write_str("pi")?,
        Term::Const(c) => write_const(f, c)?,
        Term::Neg(x) => {
            f.write_str("-")?;
            // A literal operand is parenthesised so it is not folded into a negative literal on re-parse.
            let min = if x.is_literal() { 10 } else { 8 };
            write_term(f, x, min)?;
        }
        Term::Bin(op, a, b) => {
            let (lvl, sym) = match op {
                ArithOp::Add => (6, "+"),
                ArithOp::Sub => (6, "-"),
                ArithOp::Mul => (7, "*"),
                ArithOp::Div => (7, "//"),
            };
            write_term(f, a, lvl)?;
            write!(f, " {sym} ")?;
            write_term(f, b, lvl + 1)?;
        }
        Term::Func(g, x) => {
            write!(f, "{}(", g.name())?;
            write_term(f, x, 0)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

fn write_const(f: &mut fmt::Formatter<'_>, c: &ConstRef) -> fmt::Result {
    if let Some(i) = c.step {
        write!(f, "{i}:")?;
    }
    f.write_str(&c.name)?;
    if !c.args.is_empty() {
        f.write_str("(")?;
        for (k, a) in c.args.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write_term(f, a, 0)?;
        }
        f.write_str(")")?;
    }
    Ok(())
}

fn formula_level(g: &Formula) -> u8 {
    match g {
        Formula::Implies(..) => 1,
        Formula::Or(_) => 2,
        Formula::And(_) => 3,
        Formula::Cmp(Term::Const(_), Rel::Eq, Term::Lit(Value::Bool(true))) => 9,
        Formula::Cmp(..) => 4,
        Formula::Not(_) => 5,
        _ => 9,
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, g: &Formula, min: u8) -> fmt::Result {
    let paren = formula_level(g) < min;
    if paren {
        f.write_str("(")?;
    }
    match g {
        Formula::True => f.write_str("true")?,
        Formula::False => f.write_str("false")?,
        Formula::Cmp(Term::Const(c), Rel::Eq, Term::Lit(Value::Bool(true))) => write_const(f, c)?,
        Formula::Cmp(a, r, b) => {
            write_term(f, a, 6)?;
            write!(f, " {} ", r.symbol())?;
            write_term(f, b, 6)?;
        }
        Formula::Not(x) => match x.as_ref() {
            Formula::Cmp(a, Rel::Eq, b) if formula_level(x) == 4 => {
                write_term(f, a, 6)?;
                f.write_str(" != ")?;
                write_term(f, b, 6)?;
            }
            x => {
                f.write_str("-")?;
                write_formula(f, x, 6)?;
            }
        },
        Formula::And(v) | Formula::Or(v) => {
            let (lvl, sym) = if matches!(g, Formula::And(_)) { (3, " & ") } else { (2, " ++ ") };
            for (k, x) in v.iter().enumerate() {
                if k > 0 {
                    f.write_str(sym)?;
                }
                write_formula(f, x, lvl + 1)?;
            }
        }
        Formula::Implies(a, b) => {
            write_formula(f, a, 2)?;
            f.write_str(" ->> ")?;
            write_formula(f, b, 1)?;
        }
        Formula::Integral(m) => {
            f.write_str("integral(")?;
            write!(f, "{}; [", m.mode)?;
            write_list(f, &m.targets)?;
            f.write_str("] <- [")?;
            write_list(f, &m.sources)?;
            f.write_str("]; ")?;
            write_term(f, &m.duration, 0)?;
            f.write_str(")")?;
        }
        Formula::Dense(m) => {
            write!(f, "always_t({}; ", m.mode)?;
            write_term(f, &m.duration, 0)?;
            f.write_str("; ")?;
            write_formula(f, &m.body, 0)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

fn write_list(f: &mut fmt::Formatter<'_>, ts: &[Term]) -> fmt::Result {
    for (k, t) in ts.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        write_term(f, t, 0)?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self, 0)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

impl fmt::Display for ConstRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_const(f, self)
    }
}
