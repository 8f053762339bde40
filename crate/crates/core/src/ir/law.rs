use std::collections::{BTreeMap, BTreeSet};

use super::formula::{ConstRef, Formula, Term};
use super::sort::{Category, ConstantDecl, GroundConst, Sort};
use super::value::Value;

/// Mode selector of `derivative of … if mode=v` / `always_t … if mode=v`; a variable ranges over all modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ModeRef {
    Value(Value),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CausalLaw {
    Static { head: Formula, if_: Formula },
    ActionDynamic { head: Formula, if_: Formula },
    FluentDynamic { head: Formula, if_: Formula, after: Formula },
    Constraint { f: Formula, after: Option<Formula> },
    Nonexecutable { f: Formula, if_: Formula },
    Causes { cause: Formula, effect: Formula, if_: Formula },
    Default { f: Formula, if_: Formula, after: Option<Formula> },
    Exogenous { c: ConstRef, if_: Formula },
    Inertial { c: ConstRef, if_: Formula },
    Rate { fluent: ConstRef, rhs: Term, mode: ModeRef },
    AlwaysT { body: Formula, mode: ModeRef },
}

impl CausalLaw {
    pub fn transform_terms(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> CausalLaw {
        let c = |c: &ConstRef, f: &mut dyn FnMut(&Term) -> Option<Term>| match Term::Const(c.clone()).transform(f) {
            Term::Const(c) => c,
            _ => c.clone(),
        };
        match self {
            CausalLaw::Static { head, if_ } => CausalLaw::Static { head: head.transform_terms(f), if_: if_.transform_terms(f) },
            CausalLaw::ActionDynamic { head, if_ } => {
                CausalLaw::ActionDynamic { head: head.transform_terms(f), if_: if_.transform_terms(f) }
            }
            CausalLaw::FluentDynamic { head, if_, after } => CausalLaw::FluentDynamic {
                head: head.transform_terms(f),
                if_: if_.transform_terms(f),
                after: after.transform_terms(f),
            },
            CausalLaw::Constraint { f: g, after } => CausalLaw::Constraint {
                f: g.transform_terms(f),
                after: after.as_ref().map(|a| a.transform_terms(f)),
            },
            CausalLaw::Nonexecutable { f: g, if_ } => {
                CausalLaw::Nonexecutable { f: g.transform_terms(f), if_: if_.transform_terms(f) }
            }
            CausalLaw::Causes { cause, effect, if_ } => CausalLaw::Causes {
                cause: cause.transform_terms(f),
                effect: effect.transform_terms(f),
                if_: if_.transform_terms(f),
            },
            CausalLaw::Default { f: g, if_, after } => CausalLaw::Default {
                f: g.transform_terms(f),
                if_: if_.transform_terms(f),
                after: after.as_ref().map(|a| a.transform_terms(f)),
            },
            CausalLaw::Exogenous { c: k, if_ } => CausalLaw::Exogenous { c: c(k, f), if_: if_.transform_terms(f) },
            CausalLaw::Inertial { c: k, if_ } => CausalLaw::Inertial { c: c(k, f), if_: if_.transform_terms(f) },
            CausalLaw::Rate { fluent, rhs, mode } => {
                CausalLaw::Rate { fluent: c(fluent, f), rhs: rhs.transform(f), mode: mode.clone() }
            }
            CausalLaw::AlwaysT { body, mode } => CausalLaw::AlwaysT { body: body.transform_terms(f), mode: mode.clone() },
        }
    }

    /// All formulas of the law (terms of rate declarations are wrapped as `rhs = rhs`).
    pub fn formulas(&self) -> Vec<Formula> {
        match self {
            CausalLaw::Static { head, if_ } | CausalLaw::ActionDynamic { head, if_ } => vec![head.clone(), if_.clone()],
            CausalLaw::FluentDynamic { head, if_, after } => vec![head.clone(), if_.clone(), after.clone()],
            CausalLaw::Constraint { f, after } => std::iter::once(f.clone()).chain(after.clone()).collect(),
            CausalLaw::Nonexecutable { f, if_ } => vec![f.clone(), if_.clone()],
            CausalLaw::Causes { cause, effect, if_ } => vec![cause.clone(), effect.clone(), if_.clone()],
            CausalLaw::Default { f, if_, after } => vec![f.clone(), if_.clone()].into_iter().chain(after.clone()).collect(),
            CausalLaw::Exogenous { c, if_ } | CausalLaw::Inertial { c, if_ } => {
                vec![Formula::eq(Term::Const(c.clone()), Term::Const(c.clone())), if_.clone()]
            }
            CausalLaw::Rate { fluent, rhs, .. } => vec![Formula::eq(Term::Const(fluent.clone()), rhs.clone())],
            CausalLaw::AlwaysT { body, .. } => vec![body.clone()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub sort: Sort,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryBlock {
    pub label: String,
    pub maxstep: Option<u32>,
    /// Time-stamped formulas (`0:x1 = 0`).
    pub constraints: Vec<Formula>,
}

impl QueryBlock {
    pub fn transform_terms(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> QueryBlock {
        QueryBlock {
            label: self.label.clone(),
            maxstep: self.maxstep,
            constraints: self.constraints.iter().map(|c| c.transform_terms(f)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActionDescription {
    /// Declared (named) sorts; anonymous sorts live inside the constant declarations.
    pub sorts: Vec<Sort>,
    pub constants: Vec<ConstantDecl>,
    pub variables: Vec<VarDecl>,
    pub laws: Vec<CausalLaw>,
}

impl ActionDescription {
    pub fn constant(&self, name: &str) -> Option<&ConstantDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// ODE mode: differentiable fluents or rate/always_t laws are present.
    pub fn is_ode(&self) -> bool {
        self.constants.iter().any(|c| c.category == Category::DifferentiableFluent)
            || self.laws.iter().any(|l| matches!(l, CausalLaw::Rate { .. } | CausalLaw::AlwaysT { .. }))
    }

    /// Symbolic constants awaiting `-c` values.
    pub fn params(&self) -> BTreeSet<String> {
        self.laws.iter().flat_map(|l| l.formulas()).flat_map(|f| f.params()).collect()
    }

    pub fn substitute_params(&self, values: &BTreeMap<String, Value>) -> ActionDescription {
        let mut f = param_substituter(values);
        ActionDescription { laws: self.laws.iter().map(|l| l.transform_terms(&mut f)).collect(), ..self.clone() }
    }
}

pub fn param_substituter(values: &BTreeMap<String, Value>) -> impl FnMut(&Term) -> Option<Term> + '_ {
    move |t| match t {
        Term::Param(p) => values.get(p).map(|v| Term::Lit(v.clone())),
        _ => None,
    }
}

/// All ground instances of a declared constant.
pub fn ground_instances(decl: &ConstantDecl) -> Vec<GroundConst> {
    let mut out = vec![vec![]];
    for s in &decl.args {
        let dom = s.domain().unwrap_or_default();
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Value>| {
                dom.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|args| GroundConst { name: decl.name.clone(), args }).collect()
}

/// A parsed `.cp` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub description: ActionDescription,
    pub queries: Vec<QueryBlock>,
}

impl Program {
    pub fn query(&self, label: Option<&str>) -> Option<&QueryBlock> {
        match label {
            Some(l) => self.queries.iter().find(|q| q.label == l),
            None => self.queries.first(),
        }
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut p = self.description.params();
        for q in &self.queries {
            for c in &q.constraints {
                p.extend(c.params());
            }
        }
        p
    }

    pub fn substitute_params(&self, values: &BTreeMap<String, Value>) -> Program {
        let mut f = param_substituter(values);
        Program {
            description: self.description.substitute_params(values),
            queries: self.queries.iter().map(|q| q.transform_terms(&mut f)).collect(),
        }
    }
}
