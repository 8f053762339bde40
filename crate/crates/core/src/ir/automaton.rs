use std::collections::{BTreeMap, BTreeSet};

use super::formula::{Formula, Term};
use super::law::{param_substituter, QueryBlock};
use super::value::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Switch {
    pub from: Value,
    pub to: Value,
    pub hevent: String,
    pub guard: Formula,
    /// Relation over `x` (pre-state) and `x'` (post-state).
    pub reset: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Flow {
    /// Per mode, a formula over the primed (derivative) names.
    Linear(BTreeMap<Value, Formula>),
    /// Per mode and variable, the right-hand side of `x' = g(X)`.
    Ode(BTreeMap<Value, BTreeMap<String, Term>>),
}

/// Per mode and variable, a closed form `f_i(δ)` over pre-state variables and `delta`.
pub type Witnesses = BTreeMap<Value, BTreeMap<String, Term>>;

/// Formulas use unstamped constants for the variables and `Term::Primed` for `x'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridAutomaton {
    pub variables: Vec<String>,
    pub modes: Vec<Value>,
    pub switches: Vec<Switch>,
    pub init: BTreeMap<Value, Formula>,
    pub inv: BTreeMap<Value, Formula>,
    pub flow: Flow,
    pub witness: Option<Witnesses>,
    pub query: Option<QueryBlock>,
}

impl HybridAutomaton {
    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    pub fn hevents(&self) -> Vec<&str> {
        self.switches.iter().map(|s| s.hevent.as_str()).collect()
    }

    pub fn inv_of(&self, v: &Value) -> Formula {
        self.inv.get(v).cloned().unwrap_or(Formula::True)
    }

    pub fn switch(&self, hevent: &str) -> Option<&Switch> {
        self.switches.iter().find(|s| s.hevent == hevent)
    }

    /// Symbolic constants awaiting `-c` values.
    pub fn params(&self) -> BTreeSet<String> {
        let mut fs: Vec<Formula> = vec![];
        for s in &self.switches {
            fs.extend([s.guard.clone(), s.reset.clone()]);
        }
        fs.extend(self.init.values().cloned());
        fs.extend(self.inv.values().cloned());
        let as_formula = |t: &Term| Formula::eq(t.clone(), t.clone());
        match &self.flow {
            Flow::Linear(m) => fs.extend(m.values().cloned()),
            Flow::Ode(m) => fs.extend(m.values().flat_map(|r| r.values().map(as_formula))),
        }
        if let Some(w) = &self.witness {
            fs.extend(w.values().flat_map(|r| r.values().map(as_formula)));
        }
        if let Some(q) = &self.query {
            fs.extend(q.constraints.iter().cloned());
        }
        fs.iter().flat_map(|f| f.params()).collect()
    }

    pub fn substitute_params(&self, values: &BTreeMap<String, Value>) -> HybridAutomaton {
        let mut f = param_substituter(values);
        let terms = |m: &BTreeMap<Value, BTreeMap<String, Term>>, f: &mut dyn FnMut(&Term) -> Option<Term>| {
            m.iter().map(|(k, r)| (k.clone(), r.iter().map(|(x, t)| (x.clone(), t.transform(f))).collect())).collect()
        };
        let flow = match &self.flow {
            Flow::Linear(m) => Flow::Linear(m.iter().map(|(k, g)| (k.clone(), g.transform_terms(&mut f))).collect()),
            Flow::Ode(m) => Flow::Ode(terms(m, &mut f)),
        };
        HybridAutomaton {
            variables: self.variables.clone(),
            modes: self.modes.clone(),
            switches: self
                .switches
                .iter()
                .map(|s| Switch { guard: s.guard.transform_terms(&mut f), reset: s.reset.transform_terms(&mut f), ..s.clone() })
                .collect(),
            init: self.init.iter().map(|(k, g)| (k.clone(), g.transform_terms(&mut f))).collect(),
            inv: self.inv.iter().map(|(k, g)| (k.clone(), g.transform_terms(&mut f))).collect(),
            flow,
            witness: self.witness.as_ref().map(|w| terms(w, &mut f)),
            query: self.query.as_ref().map(|q| q.transform_terms(&mut f)),
        }
    }

    /// Per-variable derivative of an ODE-form flow, or of a linear flow made only of `x' = rhs` equations.
    pub fn ode_rhs(&self, mode: &Value) -> Option<BTreeMap<String, Term>> {
        match &self.flow {
            Flow::Ode(m) => m.get(mode).cloned(),
            Flow::Linear(m) => {
                let f = m.get(mode)?;
                let mut out = BTreeMap::new();
                for c in f.conjuncts() {
                    match c {
                        Formula::Cmp(Term::Primed(x), super::formula::Rel::Eq, rhs) if !has_primed(rhs) => {
                            out.insert(x.clone(), rhs.clone());
                        }
                        _ => return None,
                    }
                }
                (out.len() == self.variables.len()).then_some(out)
            }
        }
    }
}

fn has_primed(t: &Term) -> bool {
    let mut p = false;
    t.visit(&mut |s| {
        if matches!(s, Term::Primed(_)) {
            p = true;
        }
    });
    p
}
