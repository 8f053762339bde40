//! Elimination of schematic variables bound by equality literals: `∃V (V = s ∧ φ) ≡ φ[s/V]`.

use std::collections::{BTreeMap, BTreeSet};

use super::eval::substitute;
use super::formula::{Formula, Rel, Term};

/// Literals whose conjunction is equivalent to `f`, flattening `∧`, `¬¬`, `¬(a → b)` and `¬(a ∨ b)`.
pub fn positive_literals(f: &Formula) -> Vec<Formula> {
    let mut out = vec![];
    collect(f, true, &mut out);
    out
}

fn collect(f: &Formula, pos: bool, out: &mut Vec<Formula>) {
    match (f, pos) {
        (Formula::True, true) | (Formula::False, false) => {}
        (Formula::And(v), true) | (Formula::Or(v), false) => v.iter().for_each(|g| collect(g, pos, out)),
        (Formula::Not(g), _) => collect(g, !pos, out),
        (Formula::Implies(a, b), false) => {
            collect(a, true, out);
            collect(b, false, out);
        }
        (g, true) => out.push(g.clone()),
        (g, false) => out.push(Formula::not(g.clone())),
    }
}

/// A literal `V = s` (or `s = V`) of `f` with `V ∈ vars` and `s` free of `V`.
pub fn find_binding(f: &Formula, vars: &BTreeSet<String>) -> Option<(String, Term)> {
    let lits = positive_literals(f);
    let mut fallback = None;
    for l in &lits {
        if let Formula::Cmp(a, Rel::Eq, b) = l {
            for (x, s) in [(a, b), (b, a)] {
                if let Term::Var(v) = x {
                    if vars.contains(v) && !s.mentions_var(v) {
                        // Prefer bindings to variable-free terms.
                        let mut has_var = false;
                        s.visit(&mut |t| has_var |= matches!(t, Term::Var(_)));
                        if !has_var {
                            return Some((v.clone(), s.clone()));
                        }
                        fallback.get_or_insert((v.clone(), s.clone()));
                    }
                }
            }
        }
    }
    fallback
}

/// Eliminates the variables of `vars` from an existentially read `probe`, applying every chosen
/// binding to all formulas of `targets`. Returns the variables that could not be eliminated.
pub fn eliminate(probe: &Formula, targets: &mut [&mut Formula], vars: &BTreeSet<String>) -> BTreeSet<String> {
    let mut left = vars.clone();
    let mut probe = probe.clone();
    while let Some((v, s)) = find_binding(&probe, &left) {
        let b = BTreeMap::from([(v.clone(), s)]);
        probe = substitute(&probe, &b);
        for t in targets.iter_mut() {
            **t = substitute(t, &b);
        }
        left.remove(&v);
    }
    left.retain(|v| probe.vars().contains(v) || targets.iter().any(|t| t.vars().contains(v)));
    left
}

/// `∀V φ` rewritten without the variables bound in `¬φ`.
pub fn eliminate_forall(f: &Formula, vars: &BTreeSet<String>) -> (Formula, BTreeSet<String>) {
    let mut g = f.clone();
    let left = eliminate(&Formula::not(f.clone()), &mut [&mut g], vars);
    (g, left)
}
