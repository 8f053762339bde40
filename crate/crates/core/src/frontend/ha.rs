//! JSON hybrid-automaton descriptions.
//!
//! ```json
//! {
//!   "variables": ["x1", "x2"],
//!   "modes": [1, 2],
//!   "switches": [{"from": 1, "to": 2, "hevent": "e1", "guard": "x2 <= r2", "reset": "x1' = x1 & x2' = x2"}],
//!   "init": {"1": "x1 = 0 & x2 = 8"},
//!   "inv": {"1": "x2 >= r2", "2": "x1 >= r1"},
//!   "flow": {"linear": {"1": "x1' = w1 - v & x2' = -v"}},
//!   "witness": {"1": {"x1": "x1 + (w1 - v) * delta"}},
//!   "query": {"label": "test", "maxstep": 6, "constraints": ["0:mode = 1"]}
//! }
//! ```
//! `flow` may instead be `{"ode": {"1": {"x1": "w1 - v", "x2": "-v"}}}`. Lower-case names that are
//! not variables are parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::Value as Json;

use crate::ir::automaton::{Flow, HybridAutomaton, Switch, Witnesses};
use crate::ir::formula::{Formula, Term};
use crate::ir::law::{QueryBlock, VarDecl};
use crate::ir::sort::{Category, ConstantDecl, Sort};
use crate::ir::value::Value;

use super::lexer::{lex, ErrorKind, ParseError, SourceSpan};
use super::resolve::Resolver;
use super::syntax::{Expr, Parser};

type HResult<T> = Result<T, ParseError>;

struct Ctx {
    file: Arc<str>,
}

impl Ctx {
    fn span(&self) -> SourceSpan {
        SourceSpan { file: self.file.clone(), line: 1, column: 1, length: 0 }
    }

    fn schema<T>(&self, msg: impl Into<String>) -> HResult<T> {
        Err(ParseError::new(ErrorKind::Schema, &self.span(), msg))
    }

    fn expr(&self, path: &str, text: &str) -> HResult<Expr> {
        let file: Arc<str> = format!("{}#{path}", self.file).into();
        let toks = lex(text, &file)?;
        let mut p = Parser::new(toks);
        let e = p.formula()?;
        if !p.at_end() {
            let t = p.formula();
            return match t {
                Err(e) => Err(e),
                Ok(x) => Err(ParseError::new(ErrorKind::Syntax, &x.span, "unexpected trailing input")),
            };
        }
        Ok(e)
    }

    fn str_field<'a>(&self, path: &str, v: &'a Json) -> HResult<&'a str> {
        v.as_str().map_or_else(|| self.schema(format!("`{path}` must be a string")), Ok)
    }
}

fn mode_value(v: &Json) -> Option<Value> {
    match v {
        Json::Number(n) => {
            let r = crate::ir::value::parse_rat(&n.to_string())?;
            Some(Value::Num(r))
        }
        Json::String(s) => Some(crate::ir::value::parse_value(s)),
        _ => None,
    }
}

fn lookup_mode(modes: &[Value], key: &str) -> Option<Value> {
    modes.iter().find(|m| m.to_string() == key).cloned()
}

/// Sort of the `mode` constant of an automaton.
pub fn mode_sort(modes: &[Value]) -> Sort {
    let ints: Option<Vec<i64>> = modes
        .iter()
        .map(|m| match m {
            Value::Num(r) if r.is_integer() => num_traits::ToPrimitive::to_i64(&r.to_integer()),
            _ => None,
        })
        .collect();
    if let Some(mut is) = ints {
        is.sort();
        if !is.is_empty() && is.windows(2).all(|w| w[1] == w[0] + 1) && is.len() == modes.len() {
            return Sort::integer_range(is[0], is[is.len() - 1]);
        }
    }
    Sort::enumeration("modes", modes.to_vec())
}

pub fn parse_ha(text: &str, file: &str) -> HResult<HybridAutomaton> {
    let cx = Ctx { file: file.into() };
    let root: Json = match serde_json::from_str(text) {
        Ok(j) => j,
        Err(e) => {
            let sp = SourceSpan { file: cx.file.clone(), line: e.line().max(1), column: e.column().max(1), length: 1 };
            return Err(ParseError::new(ErrorKind::Schema, &sp, format!("invalid JSON: {e}")));
        }
    };
    let Some(obj) = root.as_object() else {
        return cx.schema("top level must be an object");
    };
    for k in obj.keys() {
        if !["variables", "modes", "switches", "init", "inv", "flow", "witness", "query"].contains(&k.as_str()) {
            return cx.schema(format!("unknown key `{k}`"));
        }
    }
    let Some(vars) = obj.get("variables").and_then(|v| v.as_array()) else {
        return cx.schema("`variables` must be a list of names");
    };
    let mut variables = vec![];
    for v in vars {
        let n = cx.str_field("variables", v)?;
        if !n.starts_with(|c: char| c.is_ascii_lowercase()) || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return cx.schema(format!("variable name `{n}` must be a lower-case identifier"));
        }
        if variables.iter().any(|x: &String| x == n) || n == "mode" {
            return cx.schema(format!("duplicate variable `{n}`"));
        }
        variables.push(n.to_string());
    }
    let Some(ms) = obj.get("modes").and_then(|v| v.as_array()) else {
        return cx.schema("`modes` must be a non-empty list");
    };
    let mut modes = vec![];
    for m in ms {
        let Some(v) = mode_value(m) else {
            return cx.schema("modes must be numbers or names");
        };
        if modes.contains(&v) {
            return cx.schema(format!("duplicate mode `{v}`"));
        }
        modes.push(v);
    }
    if modes.is_empty() {
        return cx.schema("`modes` must be a non-empty list");
    }

    // Variables are fluent constants; mode names are objects.
    let mut constants: Vec<ConstantDecl> =
        variables.iter().map(|v| ConstantDecl::new(v.clone(), Sort::real(), Category::SimpleFluent)).collect();
    let msort = mode_sort(&modes);
    constants.push(ConstantDecl::new("mode", msort.clone(), Category::SimpleFluent));
    let objects: Vec<(Value, String)> = modes.iter().map(|m| (m.clone(), msort.name.clone())).collect();
    let plain = Resolver::standalone(constants.clone(), vec![], &objects);

    let mut switches: Vec<Switch> = vec![];
    if let Some(sw) = obj.get("switches") {
        let Some(sw) = sw.as_array() else {
            return cx.schema("`switches` must be a list");
        };
        for (k, s) in sw.iter().enumerate() {
            let path = format!("switches[{k}]");
            let Some(so) = s.as_object() else {
                return cx.schema(format!("`{path}` must be an object"));
            };
            let get_mode = |key: &str| -> HResult<Value> {
                match so.get(key).and_then(mode_value) {
                    Some(v) if modes.contains(&v) => Ok(v),
                    _ => cx.schema(format!("`{path}.{key}` must name a declared mode")),
                }
            };
            let from = get_mode("from")?;
            let to = get_mode("to")?;
            let Some(hevent) = so.get("hevent").and_then(|h| h.as_str()) else {
                return cx.schema(format!("`{path}.hevent` must be a string"));
            };
            if switches.iter().any(|s| s.hevent == hevent) {
                return cx.schema(format!("duplicate hevent `{hevent}`"));
            }
            if variables.iter().any(|v| v == hevent) || ["mode", "wait", "duration"].contains(&hevent) {
                return cx.schema(format!("hevent `{hevent}` clashes with a reserved name"));
            }
            let guard = match so.get("guard") {
                None => Formula::True,
                Some(g) => plain.resolve_formula(&cx.expr(&format!("{path}.guard"), cx.str_field("guard", g)?)?, false)?,
            };
            let reset = match so.get("reset") {
                None => Formula::and(variables.iter().map(|v| Formula::eq(Term::Primed(v.clone()), Term::constant(v))).collect()),
                Some(r) => plain.resolve_formula(&cx.expr(&format!("{path}.reset"), cx.str_field("reset", r)?)?, false)?,
            };
            switches.push(Switch { from, to, hevent: hevent.to_string(), guard, reset });
        }
    }

    let mode_map = |key: &str| -> HResult<BTreeMap<Value, Formula>> {
        let mut out = BTreeMap::new();
        let Some(m) = obj.get(key) else {
            return Ok(out);
        };
        let Some(m) = m.as_object() else {
            return cx.schema(format!("`{key}` must map modes to formulas"));
        };
        for (k, f) in m {
            let Some(mode) = lookup_mode(&modes, k) else {
                return cx.schema(format!("`{key}` refers to undeclared mode `{k}`"));
            };
            let e = cx.expr(&format!("{key}.{k}"), cx.str_field(key, f)?)?;
            out.insert(mode, plain.resolve_formula(&e, false)?);
        }
        Ok(out)
    };
    let init = mode_map("init")?;
    let inv = mode_map("inv")?;

    let Some(flow) = obj.get("flow").and_then(|f| f.as_object()) else {
        return cx.schema("`flow` must be an object with key `linear` or `ode`");
    };
    if flow.len() != 1 {
        return cx.schema("`flow` must have exactly one of `linear` or `ode`");
    }
    let flow = if let Some(lin) = flow.get("linear") {
        let Some(lin) = lin.as_object() else {
            return cx.schema("`flow.linear` must map modes to formulas");
        };
        let mut out = BTreeMap::new();
        for (k, f) in lin {
            let Some(mode) = lookup_mode(&modes, k) else {
                return cx.schema(format!("`flow.linear` refers to undeclared mode `{k}`"));
            };
            let e = cx.expr(&format!("flow.linear.{k}"), cx.str_field("flow", f)?)?;
            out.insert(mode, plain.resolve_formula(&e, false)?);
        }
        for m in &modes {
            if !out.contains_key(m) {
                return cx.schema(format!("missing flow for mode {m}"));
            }
        }
        Flow::Linear(out)
    } else if let Some(ode) = flow.get("ode") {
        Flow::Ode(term_table(&cx, &plain, "flow.ode", ode, &modes, &variables)?)
    } else {
        return cx.schema("`flow` must have key `linear` or `ode`");
    };

    let witness = match obj.get("witness") {
        None => None,
        Some(w) => {
            let with_delta = Resolver::standalone(
                constants.clone(),
                vec![VarDecl { name: "delta".into(), sort: Sort::nonneg_real() }],
                &objects,
            );
            Some(term_table(&cx, &with_delta, "witness", w, &modes, &variables)?)
        }
    };

    let query = match obj.get("query") {
        None => None,
        Some(q) => Some(parse_query(&cx, q, &constants, &switches, &objects)?),
    };

    Ok(HybridAutomaton { variables, modes, switches, init, inv, flow, witness, query })
}

fn term_table(
    cx: &Ctx,
    r: &Resolver,
    key: &str,
    j: &Json,
    modes: &[Value],
    variables: &[String],
) -> HResult<Witnesses> {
    let Some(m) = j.as_object() else {
        return cx.schema(format!("`{key}` must map modes to variable tables"));
    };
    let mut out = BTreeMap::new();
    for (k, tab) in m {
        let Some(mode) = lookup_mode(modes, k) else {
            return cx.schema(format!("`{key}` refers to undeclared mode `{k}`"));
        };
        let Some(tab) = tab.as_object() else {
            return cx.schema(format!("`{key}.{k}` must map variables to expressions"));
        };
        let mut row = BTreeMap::new();
        for (x, t) in tab {
            if !variables.contains(x) {
                return cx.schema(format!("`{key}.{k}` refers to undeclared variable `{x}`"));
            }
            let e = cx.expr(&format!("{key}.{k}.{x}"), cx.str_field(key, t)?)?;
            row.insert(x.clone(), r.resolve_term(&e)?);
        }
        out.insert(mode, row);
    }
    for m in modes {
        for x in variables {
            if !out.get(m).is_some_and(|row: &BTreeMap<String, Term>| row.contains_key(x)) {
                return cx.schema(format!("`{key}` has no entry for variable `{x}` in mode {m}"));
            }
        }
    }
    Ok(out)
}

fn parse_query(
    cx: &Ctx,
    q: &Json,
    constants: &[ConstantDecl],
    switches: &[Switch],
    objects: &[(Value, String)],
) -> HResult<QueryBlock> {
    let Some(qo) = q.as_object() else {
        return cx.schema("`query` must be an object");
    };
    let label = qo.get("label").and_then(|l| l.as_str()).unwrap_or("query").to_string();
    let maxstep = match qo.get("maxstep") {
        None => None,
        Some(m) => match m.as_u64().and_then(|m| u32::try_from(m).ok()) {
            Some(m) => Some(m),
            None => return cx.schema("`query.maxstep` must be a non-negative integer"),
        },
    };
    let mut cs = constants.to_vec();
    let hevents: BTreeSet<&str> = switches.iter().map(|s| s.hevent.as_str()).collect();
    cs.extend(hevents.iter().map(|h| ConstantDecl::new(*h, Sort::boolean(), Category::Action)));
    cs.push(ConstantDecl::new("wait", Sort::boolean(), Category::Action));
    cs.push(ConstantDecl::new("duration", Sort::nonneg_real(), Category::Action));
    let r = Resolver::standalone(cs, vec![], objects);
    let mut constraints = vec![];
    if let Some(items) = qo.get("constraints") {
        let Some(items) = items.as_array() else {
            return cx.schema("`query.constraints` must be a list of formulas");
        };
        for (k, it) in items.iter().enumerate() {
            let e = cx.expr(&format!("query.constraints[{k}]"), cx.str_field("query.constraints", it)?)?;
            let f = r.resolve_formula(&e, true)?;
            if f.constants().iter().any(|c| c.step.is_none()) {
                return Err(ParseError::new(ErrorKind::Syntax, &e.span, "query constants need a time stamp `i:`"));
            }
            constraints.push(f);
        }
    }
    Ok(QueryBlock { label, maxstep, constraints })
}

