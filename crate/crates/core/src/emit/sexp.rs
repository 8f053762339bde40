//! Minimal reader for emitted scripts: balanced lists, declare-before-use and a single check-sat.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    /// `( … )`
    List(Vec<Sexp>),
    /// `[ … ]`
    Vector(Vec<Sexp>),
}

impl Sexp {
    pub fn head(&self) -> Option<&str> {
        match self {
            Sexp::List(v) => match v.first() {
                Some(Sexp::Atom(a)) => Some(a),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn items(&self) -> &[Sexp] {
        match self {
            Sexp::List(v) | Sexp::Vector(v) => v,
            Sexp::Atom(_) => &[],
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    fn atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Sexp::Atom(a) => out.push(a),
            Sexp::List(v) | Sexp::Vector(v) => v.iter().for_each(|s| s.atoms(out)),
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, v: &[Sexp]| -> fmt::Result {
            for (i, s) in v.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{s}")?;
            }
            Ok(())
        };
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(v) => {
                f.write_str("(")?;
                join(f, v)?;
                f.write_str(")")
            }
            Sexp::Vector(v) => {
                f.write_str("[")?;
                join(f, v)?;
                f.write_str("]")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ScriptError(pub String);

/// Reads every top-level expression. `d/dt[x]` reads as the atom `d/dt` followed by the vector `[x]`.
pub fn parse(text: &str) -> Result<Vec<Sexp>, ScriptError> {
    let mut stack: Vec<(char, Vec<Sexp>)> = vec![(' ', vec![])];
    let mut atom = String::new();
    let flush = |atom: &mut String, stack: &mut Vec<(char, Vec<Sexp>)>| {
        if !atom.is_empty() {
            stack.last_mut().unwrap().1.push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    for (line, l) in text.lines().enumerate() {
        let l = l.split(';').next().unwrap_or("");
        for ch in l.chars() {
            match ch {
                '(' | '[' => {
                    flush(&mut atom, &mut stack);
                    stack.push((ch, vec![]));
                }
                ')' | ']' => {
                    flush(&mut atom, &mut stack);
                    let (open, items) = stack.pop().unwrap();
                    let ok = matches!((open, ch), ('(', ')') | ('[', ']'));
                    if !ok || stack.is_empty() {
                        return Err(ScriptError(format!("line {}: unbalanced `{ch}`", line + 1)));
                    }
                    let s = if ch == ')' { Sexp::List(items) } else { Sexp::Vector(items) };
                    stack.last_mut().unwrap().1.push(s);
                }
                c if c.is_whitespace() => flush(&mut atom, &mut stack),
                c => atom.push(c),
            }
        }
        flush(&mut atom, &mut stack);
    }
    if stack.len() != 1 {
        return Err(ScriptError("unbalanced: unclosed `(`".into()));
    }
    Ok(stack.pop().unwrap().1)
}

const BUILTIN: &[&str] = &[
    "and", "or", "not", "=>", "=", "<", "<=", ">", ">=", "+", "-", "*", "/", "true", "false", "integral", "forall_t",
    "d/dt", "sin", "cos", "tan", "exp", "ite",
];

fn is_number(a: &str) -> bool {
    !a.is_empty() && a.chars().all(|c| c.is_ascii_digit() || c == '.') && a.chars().any(|c| c.is_ascii_digit())
}

/// Structure of a well-formed script.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptSummary {
    pub logic: String,
    pub declared: BTreeSet<String>,
    pub odes: Vec<String>,
    pub assertions: Vec<Sexp>,
}

/// Checks logic first, declare-before-use, one check-sat then exit.
pub fn check_script(text: &str) -> Result<ScriptSummary, ScriptError> {
    let cmds = parse(text)?;
    let mut sum = ScriptSummary::default();
    let mut check_sats = 0;
    let err = |m: String| Err(ScriptError(m));
    for (k, c) in cmds.iter().enumerate() {
        let items = c.items();
        if check_sats > 0 && c.head() != Some("exit") {
            return err(format!("command after check-sat: {c}"));
        }
        match c.head() {
            Some("set-logic") if k == 0 => sum.logic = items.get(1).and_then(Sexp::atom).unwrap_or("").to_string(),
            Some("set-logic") => return err("set-logic is not the first command".into()),
            _ if k == 0 => return err("script does not start with set-logic".into()),
            Some("declare-fun") | Some("declare-const") => {
                let name = items.get(1).and_then(Sexp::atom).ok_or_else(|| ScriptError(format!("bad declaration {c}")))?;
                if !sum.declared.insert(name.to_string()) {
                    return err(format!("`{name}` declared twice"));
                }
            }
            Some("define-ode") => {
                let name = items.get(1).and_then(Sexp::atom).ok_or_else(|| ScriptError(format!("bad define-ode {c}")))?;
                for row in items.get(2).map(Sexp::items).unwrap_or_default() {
                    check_declared(row, &sum)?;
                }
                sum.odes.push(name.to_string());
            }
            Some("assert") => {
                let body = items.get(1).ok_or_else(|| ScriptError("empty assert".into()))?;
                check_declared(body, &sum)?;
                sum.assertions.push(body.clone());
            }
            Some("check-sat") => check_sats += 1,
            Some("exit") => {}
            _ => return err(format!("unknown command {c}")),
        }
    }
    if check_sats != 1 {
        return err(format!("{check_sats} check-sat commands"));
    }
    Ok(sum)
}

fn check_declared(s: &Sexp, sum: &ScriptSummary) -> Result<(), ScriptError> {
    let mut atoms = vec![];
    s.atoms(&mut atoms);
    for a in atoms {
        if BUILTIN.contains(&a) || is_number(a) || sum.declared.contains(a) || sum.odes.iter().any(|o| o == a) {
            continue;
        }
        return Err(ScriptError(format!("`{a}` used before declaration")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_vectors_and_derivatives() {
        let s = parse("(define-ode flow_1 ((= d/dt[x] (cos theta))))").unwrap();
        assert_eq!(s[0].to_string(), "(define-ode flow_1 ((= d/dt [x] (cos theta))))");
    }

    #[test]
    fn rejects_unbalanced_and_undeclared() {
        assert!(parse("(assert (> x 1)").is_err());
        assert!(parse("(assert (> x 1)))").is_err());
        let e = check_script("(set-logic QF_NRA)\n(assert (> x 1))\n(check-sat)\n(exit)\n").unwrap_err();
        assert!(e.0.contains("`x` used before declaration"));
        let ok = check_script("(set-logic QF_NRA)\n(declare-fun x () Real)\n(assert (> x 1.5))\n(check-sat)\n(exit)\n");
        assert_eq!(ok.unwrap().assertions.len(), 1);
    }
}
