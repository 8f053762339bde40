//! Serialization of a completed system into the dReal dialect of SMT-LIB2.

pub mod sexp;

use std::collections::BTreeMap;
use std::fmt;

use crate::ground::{stamped_of, CompletedSystem};
use crate::ir::formula::{ArithOp, ConstRef, Formula, Rel, Term};
use crate::ir::sort::{Category, GroundConst, Sort, SortKind, Stamped};
use crate::ir::value::{exact_decimal, Rat, Value};
use num_traits::Signed;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("integral marker for mode {0} has no flow table entry")]
    MissingFlow(Value),
    #[error("identifier `{name}` names both {a} and {b}")]
    Collision { name: String, a: String, b: String },
    #[error("unbound parameter `{0}`; supply it with -c {0}=VALUE")]
    UnboundParam(String),
    #[error("schematic variable `{0}` survives completion")]
    Variable(String),
    #[error("query mentions step {step} beyond horizon {m}")]
    StepOutOfRange { step: u32, m: u32 },
    #[error("constant `{0}` is not in the signature")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Logic {
    QfNra,
    QfNraOde,
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Logic::QfNra => "QF_NRA",
            Logic::QfNraOde => "QF_NRA_ODE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: Logic,
    /// `(name, "Real" | "Bool")`.
    pub declarations: Vec<(String, &'static str)>,
    /// `(flow_v, [(x, rhs)])`.
    pub odes: Vec<(String, Vec<(String, String)>)>,
    pub assertions: Vec<String>,
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(set-logic {})", self.logic)?;
        for (n, s) in &self.declarations {
            writeln!(f, "(declare-fun {n} () {s})")?;
        }
        for (name, rows) in &self.odes {
            write!(f, "(define-ode {name} (")?;
            for (x, rhs) in rows {
                write!(f, "(= d/dt[{x}] {rhs})")?;
            }
            writeln!(f, "))")?;
        }
        for a in &self.assertions {
            writeln!(f, "(assert {a})")?;
        }
        writeln!(f, "(check-sat)")?;
        writeln!(f, "(exit)")
    }
}

fn flat(v: &Value) -> String {
    v.to_string().replace('-', "m").replace('.', "p").replace('/', "d")
}

fn base_name(c: &GroundConst) -> String {
    let mut s = c.name.clone();
    for a in &c.args {
        s.push('_');
        s.push_str(&flat(a));
    }
    s
}

/// `0:c ↦ c_0` and `i:c ↦ c_(i−1)_t` (i > 0) for differentiable fluents; `i:c ↦ c_i` otherwise.
pub fn rename_dr(s: &Stamped, differentiable: bool) -> String {
    let base = base_name(&s.c);
    match (s.step, differentiable) {
        (None, _) => base,
        (Some(0), _) | (Some(_), false) => format!("{base}_{}", s.step.unwrap_or(0)),
        (Some(i), true) => format!("{base}_{}_t", i - 1),
    }
}

/// Numeric literal: decimal when exact, `(/ p q)` otherwise; negatives as `(- …)`.
pub fn rat_sexp(r: &Rat) -> String {
    if r.is_negative() {
        return format!("(- {})", rat_sexp(&-r));
    }
    exact_decimal(r).unwrap_or_else(|| format!("(/ {} {})", r.numer(), r.denom()))
}

struct Emitter<'a> {
    cs: &'a CompletedSystem,
    symbols: BTreeMap<String, usize>,
}

impl Emitter<'_> {
    fn is_diff(&self, name: &str) -> bool {
        self.cs.program.description.constant(name).is_some_and(|d| d.category == Category::DifferentiableFluent)
    }

    fn value(&self, v: &Value) -> String {
        match v {
            Value::Bool(b) => b.to_string(),
            Value::Num(r) => rat_sexp(r),
            Value::Sym(s) => self.symbols.get(s).map(|i| i.to_string()).unwrap_or_else(|| s.clone()),
        }
    }

    fn constant(&self, c: &ConstRef) -> Result<String, EmitError> {
        let s = stamped_of(c).ok_or_else(|| EmitError::Unknown(c.to_string()))?;
        if let Some(step) = s.step {
            if step > self.cs.program.m {
                return Err(EmitError::StepOutOfRange { step, m: self.cs.program.m });
            }
        }
        Ok(rename_dr(&s, self.is_diff(&c.name)))
    }

    fn term(&self, t: &Term) -> Result<String, EmitError> {
        Ok(match t {
            Term::Lit(v) => self.value(v),
            Term::Const(c) => self.constant(c)?,
            Term::Var(v) | Term::Primed(v) => return Err(EmitError::Variable(v.clone())),
            Term::Param(p) => return Err(EmitError::UnboundParam(p.clone())),
            Term::Pi => format!("{:.15}", std::f64::consts::PI),
            Term::Neg(x) => format!("(- {})", self.term(x)?),
            Term::Bin(op, a, b) => {
                let o = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                format!("({o} {} {})", self.term(a)?, self.term(b)?)
            }
            Term::Func(g, x) => format!("({} {})", g.name(), self.term(x)?),
        })
    }

    fn names(&self, ts: &[Term]) -> Result<String, EmitError> {
        Ok(ts.iter().map(|t| self.term(t)).collect::<Result<Vec<_>, _>>()?.join(" "))
    }

    fn formula(&self, f: &Formula) -> Result<String, EmitError> {
        let list = |op: &str, v: &[Formula]| -> Result<String, EmitError> {
            let parts = v.iter().map(|g| self.formula(g)).collect::<Result<Vec<_>, _>>()?;
            Ok(format!("({op} {})", parts.join(" ")))
        };
        Ok(match f {
            Formula::True => "true".into(),
            Formula::False => "false".into(),
            Formula::Cmp(a, r, b) => {
                let o = match r {
                    Rel::Eq => "=",
                    Rel::Lt => "<",
                    Rel::Le => "<=",
                    Rel::Gt => ">",
                    Rel::Ge => ">=",
                };
                format!("({o} {} {})", self.term(a)?, self.term(b)?)
            }
            Formula::Not(g) => format!("(not {})", self.formula(g)?),
            Formula::And(v) => list("and", v)?,
            Formula::Or(v) => list("or", v)?,
            Formula::Implies(a, b) => format!("(=> {} {})", self.formula(a)?, self.formula(b)?),
            Formula::Integral(m) => {
                self.cs.program.description.flow_table.get(&m.mode).ok_or_else(|| EmitError::MissingFlow(m.mode.clone()))?;
                format!(
                    "(= [{}] (integral 0. {} [{}] flow_{}))",
                    self.names(&m.targets)?,
                    self.term(&m.duration)?,
                    self.names(&m.sources)?,
                    self.value(&m.mode)
                )
            }
            Formula::Dense(m) => {
                format!("(forall_t {} [0 {}] {})", self.value(&m.mode), self.term(&m.duration)?, self.formula(&m.body)?)
            }
        })
    }

    /// Sort restriction of one identifier.
    fn bounds(&self, name: &str, sort: &Sort) -> Option<String> {
        match &sort.kind {
            SortKind::Boolean => None,
            _ if sort.is_finite() => {
                let dom = sort.domain()?;
                let eqs: Vec<String> = dom.iter().map(|v| format!("(= {name} {})", self.value(v))).collect();
                Some(if eqs.len() == 1 { eqs[0].clone() } else { format!("(or {})", eqs.join(" ")) })
            }
            _ => match sort.bounds() {
                (Some(lo), Some(hi)) => Some(format!("(and (>= {name} {}) (<= {name} {}))", rat_sexp(&lo), rat_sexp(&hi))),
                (Some(lo), None) => Some(format!("(>= {name} {})", rat_sexp(&lo))),
                (None, Some(hi)) => Some(format!("(<= {name} {})", rat_sexp(&hi))),
                (None, None) => None,
            },
        }
    }
}

fn emitter(cs: &CompletedSystem) -> Emitter<'_> {
    let mut symbols = BTreeMap::new();
    for c in &cs.program.description.constants {
        if let Some(dom) = c.sort.domain() {
            for (i, v) in dom.iter().enumerate() {
                if let Value::Sym(s) = v {
                    symbols.entry(s.clone()).or_insert(i + 1);
                }
            }
        }
    }
    Emitter { cs, symbols }
}

/// `dr(F)` as an s-expression; symbolic values become their 1-based index in the sort.
pub fn formula_sexp(cs: &CompletedSystem, f: &Formula) -> Result<String, EmitError> {
    emitter(cs).formula(f)
}

/// Builds the dReal script of a completed system plus the query constraints (time-stamped formulas).
pub fn emit_script(cs: &CompletedSystem, query: &[Formula]) -> Result<SmtScript, EmitError> {
    let d = &cs.program.description;
    let e = emitter(cs);
    let has_integral = cs.constraints.iter().any(|c| c.formula.has_marker());
    let logic = if has_integral { Logic::QfNraOde } else { Logic::QfNra };

    let mut declarations = vec![];
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    let mut declare = |name: String, what: String, sort: &'static str| -> Result<(), EmitError> {
        if let Some(a) = owner.insert(name.clone(), what.clone()) {
            return Err(EmitError::Collision { name, a, b: what });
        }
        declarations.push((name, sort));
        Ok(())
    };
    let smt_sort = |s: &Sort| if s.kind == SortKind::Boolean { "Bool" } else { "Real" };
    let diff = d.differentiable();
    if logic == Logic::QfNraOde {
        for g in &diff {
            declare(base_name(g), g.to_string(), "Real")?;
            declare(format!("{}_t", base_name(g)), format!("{g} along a flow"), "Real")?;
        }
    }
    let mut assertions = vec![];
    for s in &cs.program.signature {
        let decl = d.constant(&s.c.name).ok_or_else(|| EmitError::Unknown(s.c.name.clone()))?;
        let name = rename_dr(s, decl.category == Category::DifferentiableFluent);
        declare(name.clone(), s.to_string(), smt_sort(&decl.sort))?;
        if let Some(b) = e.bounds(&name, &decl.sort) {
            assertions.push(b);
        }
    }

    let mut odes = vec![];
    if logic == Logic::QfNraOde {
        for (v, row) in &d.flow_table {
            let mut rows = vec![];
            for g in &diff {
                let rhs = row.get(g).ok_or_else(|| EmitError::MissingFlow(v.clone()))?;
                rows.push((base_name(g), e.term(rhs)?));
            }
            odes.push((format!("flow_{}", e.value(v)), rows));
        }
    }

    for c in cs.nontrivial() {
        let f = match &c.formula {
            // the mode argument of forall_t selects the flow; the guard is implicit
            Formula::Implies(_, b) if matches!(**b, Formula::Dense(_)) => (**b).clone(),
            f => f.clone(),
        };
        assertions.push(e.formula(&f)?);
    }
    for q in query {
        assertions.push(e.formula(q)?);
    }
    Ok(SmtScript { logic, declarations, odes, assertions })
}
