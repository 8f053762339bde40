//! Expansion of surface abbreviations into basic causal laws, with rate declarations and
//! `always_t` laws compiled into integral and dense-invariant markers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ir::elim::eliminate_forall;
use crate::ir::eval::substitute;
use crate::ir::formula::{ConstRef, DenseMarker, Formula, IntegralMarker, Term};
use crate::ir::law::{ground_instances, param_substituter, ActionDescription, CausalLaw, ModeRef, VarDecl};
use crate::ir::sort::{Category, ConstantDecl, GroundConst, Implicit, Sort};
use crate::ir::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DesugarError {
    #[error("undeclared constant `{0}`")]
    Undeclared(String),
    #[error("duplicate rate declaration for {fluent} in mode {mode}")]
    DuplicateRate { fluent: String, mode: Value },
    #[error("mode {mode} has no rate declaration for {fluent}")]
    IncompleteFlow { fluent: String, mode: Value },
    #[error("always_t body may mention only differentiable fluents: {0}")]
    InvariantBody(String),
    #[error("schematic variable `{var}` cannot be expanded in `{law}`")]
    Variable { var: String, law: String },
    #[error("ODE laws need an inertial `mode` constant of finite sort")]
    NoMode,
    #[error("fluent dynamic law head mentions statically determined fluent: {0}")]
    StaticHead(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LawKind {
    Static,
    ActionDynamic,
    FluentDynamic,
}

/// Where a basic law came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// Declaration keywords (`exogenousAction`, `inertialFluent`, `differentiableFluent`).
    Implicit,
    Surface,
    OdeFlow,
    OdeInvariant,
}

/// `caused head if if_ after after`; `choice` marks a `{head}^ch` default head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicLaw {
    pub kind: LawKind,
    pub head: Formula,
    pub choice: bool,
    pub if_: Formula,
    /// `True` unless the law is fluent dynamic.
    pub after: Formula,
    pub origin: Origin,
}

impl fmt::Display for BasicLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.choice {
            write!(f, "caused {{{}}}^ch", self.head)?;
        } else {
            write!(f, "caused {}", self.head)?;
        }
        if self.if_ != Formula::True {
            write!(f, " if {}", self.if_)?;
        }
        if self.kind == LawKind::FluentDynamic {
            write!(f, " after {}", self.after)?;
        }
        f.write_str(".")
    }
}

pub type FlowTable = BTreeMap<Value, BTreeMap<GroundConst, Term>>;
pub type InvariantTable = BTreeMap<Value, Vec<Formula>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicDescription {
    pub sorts: Vec<Sort>,
    pub constants: Vec<ConstantDecl>,
    pub variables: Vec<VarDecl>,
    pub laws: Vec<BasicLaw>,
    /// Mode value → differentiable fluent → derivative.
    pub flow_table: FlowTable,
    /// Mode value → `always_t` bodies, with their schematic variables eliminated.
    pub invariant_table: InvariantTable,
}

impl BasicDescription {
    pub fn constant(&self, name: &str) -> Option<&ConstantDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Ground differentiable fluents in declaration order.
    pub fn differentiable(&self) -> Vec<GroundConst> {
        self.constants
            .iter()
            .filter(|c| c.category == Category::DifferentiableFluent)
            .flat_map(ground_instances)
            .collect()
    }

    pub fn has_markers(&self) -> bool {
        self.laws.iter().any(|l| l.origin == Origin::OdeFlow || l.origin == Origin::OdeInvariant)
    }

    /// Substitutes symbolic constants and re-simplifies bodies as expansion does, dropping laws whose
    /// body becomes false.
    pub fn substitute_params(&self, values: &BTreeMap<String, Value>) -> BasicDescription {
        let mut f = param_substituter(values);
        let laws = self
            .laws
            .iter()
            .map(|l| BasicLaw {
                head: l.head.transform_terms(&mut f),
                if_: l.if_.transform_terms(&mut f).simplify(),
                after: l.after.transform_terms(&mut f).simplify(),
                ..l.clone()
            })
            .filter(|l| l.if_ != Formula::False && l.after != Formula::False)
            .collect();
        let flow_table = self
            .flow_table
            .iter()
            .map(|(m, row)| (m.clone(), row.iter().map(|(c, t)| (c.clone(), t.transform(&mut f).simplify())).collect()))
            .collect();
        let invariant_table = self
            .invariant_table
            .iter()
            .map(|(m, v)| (m.clone(), v.iter().map(|b| b.transform_terms(&mut f).simplify()).collect()))
            .collect();
        BasicDescription { laws, flow_table, invariant_table, ..self.clone() }
    }

    /// Surface laws plus the rate and `always_t` laws rebuilt from the tables.
    pub fn into_description(&self) -> ActionDescription {
        let mut laws: Vec<CausalLaw> = self
            .laws
            .iter()
            .filter(|l| l.origin == Origin::Surface)
            .map(|l| {
                let after = (l.kind == LawKind::FluentDynamic).then(|| l.after.clone());
                if l.choice {
                    return CausalLaw::Default { f: l.head.clone(), if_: l.if_.clone(), after };
                }
                match l.kind {
                    LawKind::Static => CausalLaw::Static { head: l.head.clone(), if_: l.if_.clone() },
                    LawKind::ActionDynamic => CausalLaw::ActionDynamic { head: l.head.clone(), if_: l.if_.clone() },
                    LawKind::FluentDynamic => {
                        CausalLaw::FluentDynamic { head: l.head.clone(), if_: l.if_.clone(), after: l.after.clone() }
                    }
                }
            })
            .collect();
        for (m, row) in &self.flow_table {
            for (c, rhs) in row {
                laws.push(CausalLaw::Rate {
                    fluent: ConstRef { name: c.name.clone(), args: c.args.iter().cloned().map(Term::Lit).collect(), step: None },
                    rhs: rhs.clone(),
                    mode: ModeRef::Value(m.clone()),
                });
            }
        }
        for (m, bodies) in &self.invariant_table {
            for b in bodies {
                laws.push(CausalLaw::AlwaysT { body: b.clone(), mode: ModeRef::Value(m.clone()) });
            }
        }
        ActionDescription {
            sorts: self.sorts.clone(),
            constants: self.constants.clone(),
            variables: self.variables.clone(),
            laws,
        }
    }
}

impl fmt::Display for BasicDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.laws {
            writeln!(f, "{l}")?;
        }
        for (m, row) in &self.flow_table {
            for (c, rhs) in row {
                writeln!(f, "% flow mode={m}: d/dt {c} = {rhs}")?;
            }
        }
        for (m, bodies) in &self.invariant_table {
            for b in bodies {
                writeln!(f, "% invariant mode={m}: {b}")?;
            }
        }
        Ok(())
    }
}

struct Ctx<'a> {
    d: &'a ActionDescription,
    variables: Vec<VarDecl>,
}

impl Ctx<'_> {
    fn category(&self, name: &str) -> Option<Category> {
        self.d.constant(name).map(|c| c.category)
    }

    fn has_action(&self, f: &Formula) -> bool {
        f.constants().iter().any(|c| self.category(&c.name) == Some(Category::Action))
    }

    /// A schematic variable named `base` (or `base_k`) of `sort`, declared on first use.
    fn fresh(&mut self, base: &str, sort: &Sort) -> String {
        for k in 0.. {
            let name = if k == 0 { base.to_string() } else { format!("{base}_{k}") };
            match self.variables.iter().find(|v| v.name == name) {
                Some(v) if v.sort == *sort => return name,
                Some(_) => continue,
                None => {
                    self.variables.push(VarDecl { name: name.clone(), sort: sort.clone() });
                    return name;
                }
            }
        }
        unreachable!()
    }

    fn kind(&self, head: &Formula, if_: &Formula, after: bool) -> LawKind {
        if after {
            LawKind::FluentDynamic
        } else if self.has_action(head) || self.has_action(if_) {
            LawKind::ActionDynamic
        } else {
            LawKind::Static
        }
    }

    fn push(&self, out: &mut Vec<BasicLaw>, kind: LawKind, head: Formula, choice: bool, if_: Formula, after: Formula, origin: Origin) -> Result<(), DesugarError> {
        let if_s = if_.simplify();
        let after_s = after.simplify();
        if if_s == Formula::False || after_s == Formula::False {
            return Ok(());
        }
        if kind == LawKind::FluentDynamic {
            if let Some(c) = head.constants().iter().find(|c| self.category(&c.name) == Some(Category::StaticFluent)) {
                return Err(DesugarError::StaticHead(c.to_string()));
            }
        }
        let heads = match (&head, choice) {
            (Formula::And(v), false) => v.clone(),
            _ => vec![head],
        };
        for h in heads {
            if h == Formula::True {
                continue;
            }
            out.push(BasicLaw { kind, head: h, choice, if_: if_s.clone(), after: after_s.clone(), origin });
        }
        Ok(())
    }

    /// `default c = v if G [after c = v ∧ H]` for each value, or one schematic law for real sorts.
    fn family(&mut self, out: &mut Vec<BasicLaw>, c: &ConstRef, if_: &Formula, inertial: bool, origin: Origin) -> Result<(), DesugarError> {
        let decl = self.d.constant(&c.name).ok_or_else(|| DesugarError::Undeclared(c.name.clone()))?;
        let values: Vec<Term> = match decl.sort.domain() {
            Some(dom) => dom.into_iter().map(Term::Lit).collect(),
            None => {
                let sort = decl.sort.clone();
                vec![Term::var(self.fresh(&format!("V_{}", c.name), &sort))]
            }
        };
        for v in values {
            let atom = Formula::eq(Term::Const(c.clone()), v);
            if inertial {
                let after = Formula::and(vec![atom.clone(), if_.clone()]);
                self.push(out, LawKind::FluentDynamic, atom, true, Formula::True, after, origin)?;
            } else {
                let kind = self.kind(&atom, if_, false);
                self.push(out, kind, atom, true, if_.clone(), Formula::True, origin)?;
            }
        }
        Ok(())
    }

    fn surface(&mut self, out: &mut Vec<BasicLaw>, l: &CausalLaw) -> Result<(), DesugarError> {
        let s = Origin::Surface;
        let t = Formula::True;
        match l {
            CausalLaw::Static { head, if_ } => self.push(out, LawKind::Static, head.clone(), false, if_.clone(), t, s),
            CausalLaw::ActionDynamic { head, if_ } => {
                self.push(out, LawKind::ActionDynamic, head.clone(), false, if_.clone(), t, s)
            }
            CausalLaw::FluentDynamic { head, if_, after } => {
                self.push(out, LawKind::FluentDynamic, head.clone(), false, if_.clone(), after.clone(), s)
            }
            CausalLaw::Constraint { f, after: None } => {
                self.push(out, LawKind::Static, Formula::False, false, Formula::not(f.clone()), t, s)
            }
            CausalLaw::Constraint { f, after: Some(h) } => {
                self.push(out, LawKind::FluentDynamic, Formula::False, false, Formula::not(f.clone()), h.clone(), s)
            }
            CausalLaw::Nonexecutable { f, if_ } => {
                let after = Formula::and(vec![f.clone(), if_.clone()]);
                self.push(out, LawKind::FluentDynamic, Formula::False, false, t, after, s)
            }
            CausalLaw::Causes { cause, effect, if_ } => {
                let body = Formula::and(vec![cause.clone(), if_.clone()]);
                if self.has_action(effect) {
                    self.push(out, LawKind::ActionDynamic, effect.clone(), false, body, t, s)
                } else {
                    self.push(out, LawKind::FluentDynamic, effect.clone(), false, t, body, s)
                }
            }
            CausalLaw::Default { f, if_, after } => {
                let kind = self.kind(f, if_, after.is_some());
                self.push(out, kind, f.clone(), true, if_.clone(), after.clone().unwrap_or(Formula::True), s)
            }
            CausalLaw::Exogenous { c, if_ } => self.family(out, c, if_, false, s),
            CausalLaw::Inertial { c, if_ } => self.family(out, c, if_, true, s),
            CausalLaw::Rate { .. } | CausalLaw::AlwaysT { .. } => Ok(()),
        }
    }

    /// Instances of a law's object-sorted variables.
    fn object_bindings(&self, vars: &BTreeSet<String>, law: &str) -> Result<Vec<BTreeMap<String, Term>>, DesugarError> {
        let mut out = vec![BTreeMap::new()];
        for v in vars {
            let dom = self
                .variables
                .iter()
                .find(|d| &d.name == v)
                .and_then(|d| d.sort.domain())
                .ok_or_else(|| DesugarError::Variable { var: v.clone(), law: law.to_string() })?;
            out = out
                .into_iter()
                .flat_map(|b| {
                    dom.iter().map(move |x| {
                        let mut b = b.clone();
                        b.insert(v.clone(), Term::Lit(x.clone()));
                        b
                    })
                })
                .collect();
        }
        Ok(out)
    }

    fn modes(&self, m: &ModeRef) -> Result<Vec<Value>, DesugarError> {
        match m {
            ModeRef::Value(v) => Ok(vec![v.clone()]),
            ModeRef::Var(_) => self.d.constant("mode").and_then(|c| c.sort.domain()).ok_or(DesugarError::NoMode),
        }
    }

    fn tables(&mut self) -> Result<(FlowTable, InvariantTable), DesugarError> {
        let mut flow: FlowTable = BTreeMap::new();
        let mut inv: InvariantTable = BTreeMap::new();
        for l in &self.d.laws {
            match l {
                CausalLaw::Rate { fluent, rhs, mode } => {
                    let law = crate::frontend::law_to_string(l);
                    let mut vars = BTreeSet::new();
                    for a in &fluent.args {
                        a.visit(&mut |t| {
                            if let Term::Var(v) = t {
                                vars.insert(v.clone());
                            }
                        });
                    }
                    rhs.visit(&mut |t| {
                        if let Term::Var(v) = t {
                            vars.insert(v.clone());
                        }
                    });
                    let mode_var = match mode {
                        ModeRef::Var(v) => Some(v.clone()),
                        ModeRef::Value(_) => None,
                    };
                    if let Some(v) = &mode_var {
                        vars.remove(v);
                    }
                    for m in self.modes(mode)? {
                        for b in self.object_bindings(&vars, &law)? {
                            let mut b = b.clone();
                            if let Some(v) = &mode_var {
                                b.insert(v.clone(), Term::Lit(m.clone()));
                            }
                            let c = ground_ref(fluent, &b).ok_or_else(|| DesugarError::Variable {
                                var: fluent.to_string(),
                                law: law.clone(),
                            })?;
                            let rhs = crate::ir::eval::substitute_term(rhs, &b).simplify();
                            let row = flow.entry(m.clone()).or_default();
                            if row.insert(c.clone(), rhs).is_some() {
                                return Err(DesugarError::DuplicateRate { fluent: c.to_string(), mode: m.clone() });
                            }
                        }
                    }
                }
                CausalLaw::AlwaysT { body, mode } => {
                    let law = crate::frontend::law_to_string(l);
                    for c in body.constants() {
                        if self.category(&c.name) != Some(Category::DifferentiableFluent) {
                            return Err(DesugarError::InvariantBody(law.clone()));
                        }
                    }
                    let mode_var = match mode {
                        ModeRef::Var(v) => Some(v.clone()),
                        ModeRef::Value(_) => None,
                    };
                    for m in self.modes(mode)? {
                        let mut body = body.clone();
                        if let Some(v) = &mode_var {
                            body = substitute(&body, &BTreeMap::from([(v.clone(), Term::Lit(m.clone()))]));
                        }
                        let reals: BTreeSet<String> = body
                            .vars()
                            .into_iter()
                            .filter(|v| self.variables.iter().find(|d| &d.name == v).is_none_or(|d| !d.sort.is_finite()))
                            .collect();
                        let (g, left) = eliminate_forall(&body, &reals);
                        if let Some(v) = left.into_iter().next() {
                            return Err(DesugarError::Variable { var: v, law });
                        }
                        let objs = g.vars();
                        let inst: Vec<Formula> =
                            self.object_bindings(&objs, &law)?.iter().map(|b| substitute(&g, b).simplify()).collect();
                        inv.entry(m.clone()).or_default().push(Formula::and(inst).simplify());
                    }
                }
                _ => {}
            }
        }
        let fluents: Vec<GroundConst> = self
            .d
            .constants
            .iter()
            .filter(|c| c.category == Category::DifferentiableFluent)
            .flat_map(ground_instances)
            .collect();
        for (m, row) in &flow {
            for c in &fluents {
                if !row.contains_key(c) {
                    return Err(DesugarError::IncompleteFlow { fluent: c.to_string(), mode: m.clone() });
                }
            }
        }
        Ok((flow, inv))
    }

    fn ode_laws(&mut self, out: &mut Vec<BasicLaw>, flow: &FlowTable, inv: &InvariantTable) -> Result<(), DesugarError> {
        let mode_ok = self.d.constant("mode").is_some_and(|c| c.sort.is_finite());
        if (!flow.is_empty() || !inv.is_empty()) && !mode_ok {
            return Err(DesugarError::NoMode);
        }
        let fluents: Vec<GroundConst> = self
            .d
            .constants
            .iter()
            .filter(|c| c.category == Category::DifferentiableFluent)
            .flat_map(ground_instances)
            .collect();
        let t = Term::var(self.fresh("T", &Sort::real()));
        let cref = |c: &GroundConst| Term::Const(ConstRef { name: c.name.clone(), args: c.args.iter().cloned().map(Term::Lit).collect(), step: None });
        let pre: Vec<Term> = fluents
            .iter()
            .map(|c| {
                let mut n = format!("P_{}", c.name);
                for a in &c.args {
                    n.push('_');
                    n.push_str(&a.to_string());
                }
                Term::var(self.fresh(&n, &Sort::real()))
            })
            .collect();
        let common = |m: &Value| {
            vec![
                Formula::eq(Term::constant("mode"), Term::Lit(m.clone())),
                Formula::eq(Term::constant("duration"), t.clone()),
                Formula::holds(Term::constant("wait")),
            ]
        };
        for m in flow.keys() {
            let marker = Formula::Integral(IntegralMarker {
                mode: m.clone(),
                targets: fluents.iter().map(cref).collect(),
                sources: pre.clone(),
                duration: t.clone(),
            });
            let mut after: Vec<Formula> = fluents.iter().zip(&pre).map(|(c, p)| Formula::eq(cref(c), p.clone())).collect();
            after.extend(common(m));
            self.push(out, LawKind::FluentDynamic, Formula::False, false, Formula::not(marker), Formula::and(after), Origin::OdeFlow)?;
        }
        for (m, bodies) in inv {
            for b in bodies {
                let marker = Formula::Dense(DenseMarker { mode: m.clone(), body: Box::new(b.clone()), duration: t.clone() });
                out.push(BasicLaw {
                    kind: LawKind::FluentDynamic,
                    head: Formula::False,
                    choice: false,
                    if_: Formula::not(marker),
                    after: Formula::and(common(m)),
                    origin: Origin::OdeInvariant,
                });
            }
        }
        Ok(())
    }
}

fn ground_ref(c: &ConstRef, b: &BTreeMap<String, Term>) -> Option<GroundConst> {
    let args = c
        .args
        .iter()
        .map(|a| match crate::ir::eval::substitute_term(a, b) {
            Term::Lit(v) => Some(v),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(GroundConst { name: c.name.clone(), args })
}

/// Expands every abbreviation of `d` into basic laws.
///
/// Laws implied by declaration keywords come first, then the surface laws in order, then one
/// integral law per mode and one dense-invariant law per `always_t` body.
pub fn expand_abbreviations(d: &ActionDescription) -> Result<BasicDescription, DesugarError> {
    let mut cx = Ctx { d, variables: d.variables.clone() };
    let mut laws = vec![];
    for decl in &d.constants {
        let Some(kind) = decl.implicit else { continue };
        for g in ground_instances(decl) {
            let c = ConstRef { name: g.name.clone(), args: g.args.into_iter().map(Term::Lit).collect(), step: None };
            cx.family(&mut laws, &c, &Formula::True, kind == Implicit::Inertial, Origin::Implicit)?;
        }
    }
    for l in &d.laws {
        cx.surface(&mut laws, l)?;
    }
    let (flow, inv) = cx.tables()?;
    cx.ode_laws(&mut laws, &flow, &inv)?;
    Ok(BasicDescription {
        sorts: d.sorts.clone(),
        constants: d.constants.clone(),
        variables: cx.variables,
        laws,
        flow_table: flow,
        invariant_table: inv,
    })
}
