use std::fmt;

use super::value::{fmt_rat, Rat, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SortKind {
    Boolean,
    Enumeration(Vec<Value>),
    Interval(Rat, Rat),
    NonNegReal,
    /// Unbounded reals; used for automaton variables and untyped schematic variables.
    Real,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sort {
    pub name: String,
    pub kind: SortKind,
}

impl Sort {
    pub fn boolean() -> Sort {
        Sort { name: "boolean".into(), kind: SortKind::Boolean }
    }

    pub fn real() -> Sort {
        Sort { name: "real".into(), kind: SortKind::Real }
    }

    pub fn nonneg_real() -> Sort {
        Sort { name: "nonnegReal".into(), kind: SortKind::NonNegReal }
    }

    /// Canonical name `real[lo..hi]`.
    pub fn interval(lo: Rat, hi: Rat) -> Sort {
        Sort { name: format!("real[{}..{}]", fmt_rat(&lo), fmt_rat(&hi)), kind: SortKind::Interval(lo, hi) }
    }

    pub fn enumeration(name: impl Into<String>, values: Vec<Value>) -> Sort {
        Sort { name: name.into(), kind: SortKind::Enumeration(values) }
    }

    /// Contiguous integer enumeration named `integer[lo..hi]`.
    pub fn integer_range(lo: i64, hi: i64) -> Sort {
        Sort::enumeration(format!("integer[{lo}..{hi}]"), (lo..=hi).map(Value::int).collect())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, SortKind::Boolean | SortKind::Enumeration(_))
    }

    pub fn is_numeric(&self) -> bool {
        match &self.kind {
            SortKind::Interval(..) | SortKind::NonNegReal | SortKind::Real => true,
            SortKind::Enumeration(vs) => vs.iter().all(|v| matches!(v, Value::Num(_))),
            SortKind::Boolean => false,
        }
    }

    /// Values of a finite sort.
    pub fn domain(&self) -> Option<Vec<Value>> {
        match &self.kind {
            SortKind::Boolean => Some(vec![Value::Bool(false), Value::Bool(true)]),
            SortKind::Enumeration(vs) => Some(vs.clone()),
            _ => None,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (&self.kind, v) {
            (SortKind::Boolean, Value::Bool(_)) => true,
            (SortKind::Enumeration(vs), _) => vs.contains(v),
            (SortKind::Interval(lo, hi), Value::Num(r)) => lo <= r && r <= hi,
            (SortKind::NonNegReal, Value::Num(r)) => r >= &Rat::from_integer(0.into()),
            (SortKind::Real, Value::Num(_)) => true,
            _ => false,
        }
    }

    /// Numeric lower and upper bounds, when any.
    pub fn bounds(&self) -> (Option<Rat>, Option<Rat>) {
        match &self.kind {
            SortKind::Interval(lo, hi) => (Some(lo.clone()), Some(hi.clone())),
            SortKind::NonNegReal => (Some(Rat::from_integer(0.into())), None),
            _ => (None, None),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.kind {
            SortKind::Interval(lo, hi) if lo > hi => Err(format!("sort {}: empty interval", self.name)),
            SortKind::Enumeration(vs) => {
                if vs.is_empty() {
                    return Err(format!("sort {}: no values", self.name));
                }
                for (i, v) in vs.iter().enumerate() {
                    if vs[..i].contains(v) {
                        return Err(format!("sort {}: duplicate value {v}", self.name));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    SimpleFluent,
    StaticFluent,
    DifferentiableFluent,
    Action,
}

impl Category {
    pub fn is_fluent(self) -> bool {
        self != Category::Action
    }
}

/// Law family implied by the declaration keyword (`inertialFluent`, `exogenousAction`, `differentiableFluent`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Implicit {
    Exogenous,
    Inertial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantDecl {
    pub name: String,
    pub args: Vec<Sort>,
    pub sort: Sort,
    pub category: Category,
    pub implicit: Option<Implicit>,
}

impl ConstantDecl {
    pub fn new(name: impl Into<String>, sort: Sort, category: Category) -> ConstantDecl {
        let implicit = (category == Category::DifferentiableFluent).then_some(Implicit::Exogenous);
        ConstantDecl { name: name.into(), args: vec![], sort, category, implicit }
    }

    pub fn with_implicit(mut self, i: Implicit) -> ConstantDecl {
        self.implicit = Some(i);
        self
    }

    /// Declaration keyword in the `.cp` dialect.
    pub fn keyword(&self) -> &'static str {
        match (self.category, self.implicit) {
            (Category::SimpleFluent, Some(Implicit::Inertial)) => "inertialFluent",
            (Category::SimpleFluent, _) => "simpleFluent",
            (Category::StaticFluent, _) => "sdFluent",
            (Category::DifferentiableFluent, _) => "differentiableFluent",
            (Category::Action, Some(Implicit::Exogenous)) => "exogenousAction",
            (Category::Action, _) => "action",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.sort.validate()?;
        if self.category == Category::DifferentiableFluent && !self.sort.is_numeric() {
            return Err(format!("differentiable fluent {} must be real-valued", self.name));
        }
        Ok(())
    }
}

/// A constant applied to argument values, e.g. `height(b1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundConst {
    pub name: String,
    pub args: Vec<Value>,
}

impl GroundConst {
    pub fn plain(name: impl Into<String>) -> GroundConst {
        GroundConst { name: name.into(), args: vec![] }
    }
}

impl fmt::Display for GroundConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            let a: Vec<String> = self.args.iter().map(|v| v.to_string()).collect();
            write!(f, "({})", a.join(","))?;
        }
        Ok(())
    }
}

/// A ground constant with an optional time stamp `i:c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Stamped {
    pub step: Option<u32>,
    pub c: GroundConst,
}

impl Stamped {
    pub fn at(step: u32, c: GroundConst) -> Stamped {
        Stamped { step: Some(step), c }
    }

    pub fn unstamped(c: GroundConst) -> Stamped {
        Stamped { step: None, c }
    }
}

impl fmt::Display for Stamped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "{i}:{}", self.c),
            None => write!(f, "{}", self.c),
        }
    }
}
