//! Pretty-printer for the `.cp` surface syntax; its output re-parses to the same IR.

use std::fmt::Write;

use crate::ir::formula::{ConstRef, Formula, Term};
use crate::ir::law::{ActionDescription, CausalLaw, ModeRef, Program, QueryBlock};
use crate::ir::sort::{SortKind, Sort};

fn sort_arg(s: &Sort) -> String {
    match s.kind {
        SortKind::Boolean => String::new(),
        _ => format!("({})", s.name),
    }
}

fn const_ref(c: &ConstRef) -> String {
    Term::Const(c.clone()).to_string()
}

fn mode_ref(m: &ModeRef) -> String {
    match m {
        ModeRef::Value(v) => format!("mode = {v}"),
        ModeRef::Var(v) => format!("mode = {v}"),
    }
}

fn if_part(g: &Formula) -> String {
    if *g == Formula::True {
        String::new()
    } else {
        format!(" if {g}")
    }
}

fn after_part(h: Option<&Formula>) -> String {
    match h {
        Some(h) => format!(" after {h}"),
        None => String::new(),
    }
}

/// One law as a `.cp` statement, including the final period.
pub fn law_to_string(l: &CausalLaw) -> String {
    match l {
        CausalLaw::Static { head, if_ } | CausalLaw::ActionDynamic { head, if_ } => {
            format!("caused {head}{}.", if_part(if_))
        }
        CausalLaw::FluentDynamic { head, if_, after } => {
            format!("caused {head}{}{}.", if_part(if_), after_part(Some(after)))
        }
        CausalLaw::Constraint { f, after } => format!("constraint {f}{}.", after_part(after.as_ref())),
        CausalLaw::Nonexecutable { f, if_ } => format!("nonexecutable {f}{}.", if_part(if_)),
        CausalLaw::Causes { cause, effect, if_ } => format!("{cause} causes {effect}{}.", if_part(if_)),
        CausalLaw::Default { f, if_, after } => format!("default {f}{}{}.", if_part(if_), after_part(after.as_ref())),
        CausalLaw::Exogenous { c, if_ } => format!("exogenous {}{}.", const_ref(c), if_part(if_)),
        CausalLaw::Inertial { c, if_ } => format!("inertial {}{}.", const_ref(c), if_part(if_)),
        CausalLaw::Rate { fluent, rhs, mode } => {
            format!("derivative of {} is {rhs} if {}.", const_ref(fluent), mode_ref(mode))
        }
        CausalLaw::AlwaysT { body, mode } => format!("always_t {body} if {}.", mode_ref(mode)),
    }
}

fn entries(out: &mut String, header: &str, items: Vec<String>) {
    if items.is_empty() {
        return;
    }
    let _ = writeln!(out, ":- {header}");
    let _ = writeln!(out, "{}.\n", items.join(";\n"));
}

pub fn print_description(d: &ActionDescription) -> String {
    let mut out = String::new();
    entries(&mut out, "sorts", d.sorts.iter().map(|s| s.name.clone()).collect());
    let objects = d
        .sorts
        .iter()
        .filter_map(|s| match &s.kind {
            SortKind::Enumeration(vs) => {
                let vs: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                Some(format!("{} :: {}", vs.join(", "), s.name))
            }
            _ => None,
        })
        .collect();
    entries(&mut out, "objects", objects);
    let consts = d
        .constants
        .iter()
        .map(|c| {
            let args = if c.args.is_empty() {
                String::new()
            } else {
                format!("({})", c.args.iter().map(|s| s.name.clone()).collect::<Vec<_>>().join(","))
            };
            format!("{}{args} :: {}{}", c.name, c.keyword(), sort_arg(&c.sort))
        })
        .collect();
    entries(&mut out, "constants", consts);
    let vars = d
        .variables
        .iter()
        .map(|v| match v.sort.kind {
            SortKind::Real => v.name.clone(),
            _ => format!("{} :: {}", v.name, v.sort.name),
        })
        .collect();
    entries(&mut out, "variables", vars);
    for l in &d.laws {
        let _ = writeln!(out, "{}", law_to_string(l));
    }
    out
}

pub fn print_query(q: &QueryBlock) -> String {
    let mut items = vec![format!("label :: {}", q.label)];
    if let Some(m) = q.maxstep {
        items.push(format!("maxstep :: {m}"));
    }
    items.extend(q.constraints.iter().map(|c| c.to_string()));
    format!(":- query\n{}.\n", items.join(";\n"))
}

pub fn print_program(p: &Program) -> String {
    let mut out = print_description(&p.description);
    for q in &p.queries {
        out.push('\n');
        out.push_str(&print_query(q));
    }
    out
}
