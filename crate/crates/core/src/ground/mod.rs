//! Time-stamped grounding `D_m` of a basic description and its functional completion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::desugar::{BasicDescription, LawKind};
use crate::ir::elim::{eliminate, positive_literals};
use crate::ir::eval::{stamp, substitute};
use crate::ir::formula::{ConstRef, Formula, Rel, Term};
use crate::ir::law::ground_instances;
use crate::ir::sort::{Category, GroundConst, Stamped};
use crate::ir::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("program is not tight: positive cycle through {}", fmt_cycle(.0))]
    NotTight(Vec<Stamped>),
    #[error("rule head is not an atom `c = t`: {0}")]
    NotDefinite(String),
    #[error("schematic variable `{var}` cannot be eliminated from {rule}")]
    Uneliminable { var: String, rule: String },
}

fn fmt_cycle(c: &[Stamped]) -> String {
    c.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ")
}

/// `body → head` at a step; `choice` marks `{head}^ch`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: Formula,
    pub choice: bool,
    pub body: Formula,
    /// Index of the originating law in the basic description.
    pub law: usize,
    /// Step at which the law was instantiated (`i` for `(i+1):F ← (i+1):G ∧ i:H`).
    pub step: u32,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.choice {
            write!(f, "{{{}}}^ch <- {}.", self.head, self.body)
        } else {
            write!(f, "{} <- {}.", self.head, self.body)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundProgram {
    pub m: u32,
    /// `0:σ^fl … m:σ^fl` then `0:σ^act … (m−1):σ^act`.
    pub signature: Vec<Stamped>,
    pub rules: Vec<Rule>,
    pub description: BasicDescription,
}

fn const_term(s: &Stamped) -> Term {
    Term::Const(ConstRef { name: s.c.name.clone(), args: s.c.args.iter().cloned().map(Term::Lit).collect(), step: s.step })
}

/// The stamped ground constant of a constant occurrence with literal arguments.
pub fn stamped_of(c: &ConstRef) -> Option<Stamped> {
    let args = c
        .args
        .iter()
        .map(|a| match a {
            Term::Lit(v) => Some(v.clone()),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(Stamped { step: c.step, c: GroundConst { name: c.name.clone(), args } })
}

impl GroundProgram {
    pub fn category(&self, name: &str) -> Option<Category> {
        self.description.constant(name).map(|c| c.category)
    }

    /// Intensional constants: `0:σ^sd`, `0..m−1:σ^act` and `1..m:σ^fl`.
    pub fn is_intensional(&self, s: &Stamped) -> bool {
        match (self.category(&s.c.name), s.step) {
            (Some(Category::Action), Some(_)) => true,
            (Some(Category::StaticFluent), Some(_)) => true,
            (Some(_), Some(i)) => i >= 1,
            _ => false,
        }
    }

    pub fn intensional(&self) -> Vec<Stamped> {
        self.signature.iter().filter(|s| self.is_intensional(s)).cloned().collect()
    }

    /// Positive-dependency acyclicity over intensional stamped constants; returns a cycle on failure.
    pub fn check_tight(&self) -> Result<(), Vec<Stamped>> {
        let mut edges: BTreeMap<Stamped, BTreeSet<Stamped>> = BTreeMap::new();
        for r in &self.rules {
            let Some(h) = head_const(&r.head) else { continue };
            if !self.is_intensional(&h) {
                continue;
            }
            let mut pos = BTreeSet::new();
            positive_constants(&r.body, true, &mut pos);
            let e = edges.entry(h).or_default();
            e.extend(pos.into_iter().filter(|s| self.is_intensional(s)));
        }
        // Iterative DFS with colors.
        let mut color: BTreeMap<&Stamped, u8> = BTreeMap::new();
        for start in edges.keys() {
            if color.get(start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&Stamped, Vec<&Stamped>)> = vec![(start, edges[start].iter().collect())];
            color.insert(start, 1);
            while let Some((node, succ)) = stack.last_mut() {
                let node = *node;
                match succ.pop() {
                    Some(n) => match color.get(n).copied().unwrap_or(0) {
                        0 => {
                            color.insert(n, 1);
                            let next = edges.get(n).map(|s| s.iter().collect()).unwrap_or_default();
                            stack.push((n, next));
                        }
                        1 => {
                            let at = stack.iter().position(|(s, _)| *s == n).unwrap_or(0);
                            return Err(stack[at..].iter().map(|(s, _)| (*s).clone()).collect());
                        }
                        _ => {}
                    },
                    None => {
                        color.insert(node, 2);
                        stack.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

fn head_const(h: &Formula) -> Option<Stamped> {
    match h {
        Formula::Cmp(Term::Const(c), Rel::Eq, _) => stamped_of(c),
        _ => None,
    }
}

/// Constants occurring outside the scope of negation (the antecedent of `→` counts as negated).
fn positive_constants(f: &Formula, pos: bool, out: &mut BTreeSet<Stamped>) {
    match f {
        Formula::Cmp(..) | Formula::Integral(_) | Formula::Dense(_) => {
            if pos {
                for c in f.constants() {
                    if let Some(s) = stamped_of(c) {
                        out.insert(s);
                    }
                }
            }
        }
        Formula::Not(g) => positive_constants(g, false, out),
        Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| positive_constants(g, pos, out)),
        Formula::Implies(a, b) => {
            positive_constants(a, false, out);
            positive_constants(b, pos, out);
        }
        Formula::True | Formula::False => {}
    }
}

/// Instances of the object-sorted variables of a law.
fn object_instances(b: &BasicDescription, fs: &[&Formula]) -> Vec<BTreeMap<String, Term>> {
    let mut vars = BTreeSet::new();
    for f in fs {
        vars.extend(f.vars());
    }
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let Some(dom) = b.variable(&v).and_then(|d| d.sort.domain()) else { continue };
        out = out
            .into_iter()
            .flat_map(|m| {
                let v = v.clone();
                dom.iter().map(move |x| {
                    let mut m = m.clone();
                    m.insert(v.clone(), Term::Lit(x.clone()));
                    m
                })
            })
            .collect();
    }
    out
}

/// Builds `D_m`: static laws at `0..=m`, action-dynamic laws at `0..m`, fluent-dynamic laws as
/// `(i+1):F ← (i+1):G ∧ i:H` for `i < m`. Object-sorted variables are instantiated; real ones stay.
#[allow(non_snake_case)]
pub fn build_Dm(b: &BasicDescription, m: u32) -> GroundProgram {
    let mut signature = vec![];
    for i in 0..=m {
        for c in b.constants.iter().filter(|c| c.category.is_fluent()) {
            signature.extend(ground_instances(c).into_iter().map(|g| Stamped::at(i, g)));
        }
    }
    for i in 0..m {
        for c in b.constants.iter().filter(|c| c.category == Category::Action) {
            signature.extend(ground_instances(c).into_iter().map(|g| Stamped::at(i, g)));
        }
    }
    let mut rules = vec![];
    for (k, l) in b.laws.iter().enumerate() {
        let insts = object_instances(b, &[&l.head, &l.if_, &l.after]);
        let steps: Vec<u32> = match l.kind {
            LawKind::Static => (0..=m).collect(),
            LawKind::ActionDynamic | LawKind::FluentDynamic => (0..m).collect(),
        };
        for i in steps {
            for inst in &insts {
                let (head, if_, after) = (substitute(&l.head, inst), substitute(&l.if_, inst), substitute(&l.after, inst));
                let (head, body) = match l.kind {
                    LawKind::FluentDynamic => {
                        (stamp(&head, i + 1), Formula::and(vec![stamp(&if_, i + 1), stamp(&after, i)]))
                    }
                    _ => (stamp(&head, i), stamp(&if_, i)),
                };
                rules.push(Rule { head, choice: l.choice, body, law: k, step: i });
            }
        }
    }
    GroundProgram { m, signature, rules, description: b.clone() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// `¬B` for a `⊥`-headed rule.
    Integrity,
    /// `B → c = t` for a non-choice rule, or `B → marker` for an integral/dense law.
    Implication,
    /// `⋁_r (B_r ∧ c = t_r)`: the value of an intensional constant is supported. Exactly one per
    /// intensional constant; `true` when exogenous or default choices make it trivial.
    Support,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    /// Closed formula over stamped constants.
    pub formula: Formula,
    /// The constant a support constraint is about.
    pub about: Option<Stamped>,
    /// Originating rules (indices into the ground program).
    pub rules: Vec<usize>,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.about) {
            (ConstraintKind::Support, Some(c)) => write!(f, "support {c}: {}", self.formula),
            (ConstraintKind::Integrity, _) => write!(f, "integrity: {}", self.formula),
            _ => write!(f, "implication: {}", self.formula),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletedSystem {
    pub program: GroundProgram,
    pub intensional: Vec<Stamped>,
    pub constraints: Vec<Constraint>,
}

/// One disjunct of a support formula: body with the head equality, and the head value term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportCase {
    pub body: Formula,
    pub value: Term,
    pub choice: bool,
}

impl CompletedSystem {
    pub fn support(&self, c: &Stamped) -> Option<&Constraint> {
        self.constraints.iter().find(|k| k.kind == ConstraintKind::Support && k.about.as_ref() == Some(c))
    }

    /// Condition under which the rules support `c = v`: the matching disjuncts without the head equality.
    pub fn value_condition(&self, c: &Stamped, v: &Value) -> Formula {
        let cases = support_cases(&self.program, c);
        let mut out = vec![];
        for case in cases {
            match &case.value {
                Term::Lit(w) if w == v => out.push(case.body.clone()),
                Term::Lit(_) => {}
                t => out.push(Formula::and(vec![case.body.clone(), Formula::eq(t.clone(), Term::Lit(v.clone()))]).simplify()),
            }
        }
        Formula::or(out).simplify()
    }

    /// Constraints that are not trivially true.
    pub fn nontrivial(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.formula != Formula::True)
    }

    /// Conjunction of every constraint.
    pub fn formula(&self) -> Formula {
        Formula::and(self.constraints.iter().map(|c| c.formula.clone()).collect())
    }
}

impl fmt::Display for CompletedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn real_vars(p: &GroundProgram, f: &Formula) -> BTreeSet<String> {
    f.vars().into_iter().filter(|v| p.description.variable(v).is_none_or(|d| !d.sort.is_finite())).collect()
}

/// Support disjuncts of `c`, non-choice rules first, with variables eliminated.
fn support_cases(p: &GroundProgram, c: &Stamped) -> Vec<SupportCase> {
    let mut plain = vec![];
    let mut choice = vec![];
    for r in &p.rules {
        let Formula::Cmp(Term::Const(h), Rel::Eq, t) = &r.head else { continue };
        if stamped_of(h).as_ref() != Some(c) {
            continue;
        }
        let mut body = r.body.clone();
        let mut value = Formula::eq(Term::var("\u{0}"), t.clone());
        let probe = Formula::and(vec![body.clone(), Formula::eq(const_term(c), t.clone())]);
        let vars = real_vars(p, &probe);
        eliminate(&probe, &mut [&mut body, &mut value], &vars);
        let Formula::Cmp(_, _, value) = value else { unreachable!() };
        let case = SupportCase { body: body.simplify(), value, choice: r.choice };
        if r.choice {
            choice.push(case);
        } else {
            plain.push(case);
        }
    }
    plain.extend(choice);
    plain
}

/// Functional completion of a tight program with atomic heads.
pub fn complete(g: &GroundProgram) -> Result<CompletedSystem, GroundError> {
    g.check_tight().map_err(GroundError::NotTight)?;
    let mut constraints = vec![];
    let mut by_head: BTreeMap<Stamped, Vec<usize>> = BTreeMap::new();
    for (k, r) in g.rules.iter().enumerate() {
        match &r.head {
            Formula::False => {
                if r.choice {
                    continue;
                }
                let probe = r.body.clone();
                let vars = real_vars(g, &probe);
                let mut body = r.body.clone();
                let left = eliminate(&probe, &mut [&mut body], &vars);
                if let Some(v) = left.into_iter().next() {
                    return Err(GroundError::Uneliminable { var: v, rule: r.to_string() });
                }
                let body = body.simplify();
                if body == Formula::False {
                    continue;
                }
                constraints.push(integrity(body, k));
            }
            Formula::Cmp(Term::Const(h), Rel::Eq, t) if plain_term(t) => {
                let Some(s) = stamped_of(h) else {
                    return Err(GroundError::NotDefinite(r.to_string()));
                };
                by_head.entry(s.clone()).or_default().push(k);
                if r.choice {
                    continue;
                }
                let mut body = r.body.clone();
                let mut head = r.head.clone();
                let probe = Formula::and(vec![body.clone(), Formula::not(head.clone())]);
                let vars = real_vars(g, &probe);
                let left = eliminate(&probe, &mut [&mut body, &mut head], &vars);
                if let Some(v) = left.into_iter().next() {
                    return Err(GroundError::Uneliminable { var: v, rule: r.to_string() });
                }
                let f = Formula::implies(body, head).simplify();
                if f != Formula::True {
                    constraints.push(Constraint { kind: ConstraintKind::Implication, formula: f, about: None, rules: vec![k] });
                }
            }
            _ => return Err(GroundError::NotDefinite(r.to_string())),
        }
    }
    let intensional = g.intensional();
    let supports = crate::par::map(&intensional, |c| support_constraint(g, c, by_head.get(c).cloned().unwrap_or_default()));
    for s in supports {
        constraints.push(s?);
    }
    Ok(CompletedSystem { program: g.clone(), intensional, constraints })
}

/// `⋁_r (B_r ∧ c = t_r)`; `true` when unconditional cases cover the domain of `c`.
fn support_constraint(g: &GroundProgram, c: &Stamped, rules: Vec<usize>) -> Result<Constraint, GroundError> {
    let cases = support_cases(g, c);
    let formula = if covers_domain(g, c, &cases) {
        Formula::True
    } else {
        let mut disj = vec![];
        for case in &cases {
            let d = Formula::and(vec![case.body.clone(), Formula::eq(const_term(c), case.value.clone())]).simplify();
            if let Some(v) = real_vars(g, &d).into_iter().next() {
                return Err(GroundError::Uneliminable { var: v, rule: format!("support of {c}") });
            }
            disj.push(d);
        }
        Formula::or(disj).simplify()
    };
    Ok(Constraint { kind: ConstraintKind::Support, formula, about: Some(c.clone()), rules })
}

/// Unconditional cases for every value of a finite constant make its support trivially true.
fn covers_domain(g: &GroundProgram, c: &Stamped, cases: &[SupportCase]) -> bool {
    let Some(dom) = g.description.constant(&c.c.name).and_then(|d| d.sort.domain()) else { return false };
    dom.iter().all(|v| cases.iter().any(|k| k.body == Formula::True && k.value == Term::Lit(v.clone())))
}

/// Heads `c = t` are definite when `t` mentions no constants.
fn plain_term(t: &Term) -> bool {
    let mut ok = true;
    t.visit(&mut |s| ok &= !matches!(s, Term::Const(_)));
    ok
}

/// `¬B`, or `rest → marker` when `B` contains a negated integral or dense marker.
fn integrity(body: Formula, rule: usize) -> Constraint {
    let lits = positive_literals(&body);
    let markers: Vec<usize> = lits
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Formula::Not(g) if matches!(**g, Formula::Integral(_) | Formula::Dense(_))))
        .map(|(i, _)| i)
        .collect();
    if let [i] = markers[..] {
        let Formula::Not(marker) = &lits[i] else { unreachable!() };
        let rest: Vec<Formula> = lits.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l.clone()).collect();
        return Constraint {
            kind: ConstraintKind::Implication,
            formula: Formula::implies(Formula::and(rest), (**marker).clone()),
            about: None,
            rules: vec![rule],
        };
    }
    Constraint { kind: ConstraintKind::Integrity, formula: Formula::not(body).simplify(), about: None, rules: vec![rule] }
}
