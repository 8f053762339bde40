//! Shared generators and brute-force oracles for the integration tests.

#![allow(dead_code)]

pub mod linear;

use std::collections::BTreeMap;

use hybrid_cplus::desugar::expand_abbreviations;
use hybrid_cplus::frontend::parse_description;
use hybrid_cplus::ground::{build_Dm, complete, CompletedSystem, GroundProgram, Rule};
use hybrid_cplus::ir::eval::{eval_formula, Interpretation};
use hybrid_cplus::ir::formula::{Formula, Rel, Term};
use hybrid_cplus::ir::sort::Stamped;
use hybrid_cplus::ir::value::{Val, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_2016;

/// Seed from `HCPLUS_SEED`, else the fixed default.
pub fn seed() -> u64 {
    std::env::var("HCPLUS_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED)
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Simple,
    Inertial,
    Static,
    Action,
    Exogenous,
}

struct Decl {
    name: String,
    kind: Kind,
    values: Vec<&'static str>,
}

impl Decl {
    fn fluent(&self) -> bool {
        !matches!(self.kind, Kind::Action | Kind::Exogenous)
    }
}

fn atom(rng: &mut impl Rng, d: &Decl) -> String {
    format!("{} = {}", d.name, d.values.choose(rng).unwrap())
}

fn any_atom(rng: &mut impl Rng, ds: &[&Decl]) -> String {
    let d = *ds.choose(rng).unwrap();
    atom(rng, d)
}

/// Conjunction of up to two atoms; positive atoms only over `pos`, negated atoms over `neg`.
fn body(rng: &mut impl Rng, pos: &[&Decl], neg: &[&Decl]) -> Option<String> {
    let mut parts = vec![];
    for _ in 0..rng.gen_range(0..=2) {
        if !pos.is_empty() && rng.gen_bool(0.6) {
            parts.push(any_atom(rng, pos));
        } else if !neg.is_empty() {
            parts.push(format!("-({})", any_atom(rng, neg)));
        }
    }
    (!parts.is_empty()).then(|| parts.join(" & "))
}

/// A tiny tight description over boolean and three-valued constants.
pub fn tiny_description(rng: &mut impl Rng) -> String {
    tiny_description_sized(rng, 4)
}

/// As [`tiny_description`] with at most `max_consts` constants.
pub fn tiny_description_sized(rng: &mut impl Rng, max_consts: usize) -> String {
    let n = rng.gen_range(2..=max_consts);
    let mut decls = vec![];
    for k in 0..n {
        let kind = if k == 0 {
            *[Kind::Simple, Kind::Inertial, Kind::Static].choose(rng).unwrap()
        } else {
            *[Kind::Simple, Kind::Inertial, Kind::Static, Kind::Action, Kind::Exogenous].choose(rng).unwrap()
        };
        let values = if rng.gen_bool(0.7) { vec!["true", "false"] } else { vec!["a", "b", "c"] };
        decls.push(Decl { name: format!("c{k}"), kind, values });
    }
    let mut src = String::from(":- sorts\ns3.\n:- objects\na, b, c :: s3.\n:- constants\n");
    let lines: Vec<String> = decls
        .iter()
        .map(|d| {
            let kw = match d.kind {
                Kind::Simple => "simpleFluent",
                Kind::Inertial => "inertialFluent",
                Kind::Static => "sdFluent",
                Kind::Action => "action",
                Kind::Exogenous => "exogenousAction",
            };
            if d.values.len() == 3 { format!("{} :: {kw}(s3)", d.name) } else { format!("{} :: {kw}", d.name) }
        })
        .collect();
    src += &lines.join(";\n");
    src += ".\n";
    let fluents: Vec<&Decl> = decls.iter().filter(|d| d.fluent()).collect();
    let all: Vec<&Decl> = decls.iter().collect();
    for _ in 0..rng.gen_range(1..=5) {
        let h = rng.gen_range(0..decls.len());
        let hd = &decls[h];
        let lower_fl: Vec<&Decl> = decls[..h].iter().filter(|d| d.fluent()).collect();
        let lower_act: Vec<&Decl> = decls[..h].iter().filter(|d| !d.fluent()).collect();
        let kw = if rng.gen_bool(0.3) { "default" } else { "caused" };
        let law = match rng.gen_range(0..6) {
            0 => format!("constraint {}.", body(rng, &fluents, &fluents).unwrap_or_else(|| atom(rng, fluents[0]))),
            1 if decls.iter().any(|d| !d.fluent()) => {
                let acts = decls.iter().filter(|d| !d.fluent()).collect::<Vec<_>>();
                let f = body(rng, &fluents, &fluents).unwrap_or_else(|| atom(rng, fluents[0]));
                format!("nonexecutable {} if {f}.", any_atom(rng, &acts))
            }
            _ if !hd.fluent() => {
                let mut pos = fluents.clone();
                pos.extend(lower_act);
                match body(rng, &pos, &all) {
                    Some(g) => format!("{kw} {} if {g}.", atom(rng, hd)),
                    None => format!("{kw} {}.", atom(rng, hd)),
                }
            }
            2 | 3 if hd.kind != Kind::Static => {
                let g = body(rng, &lower_fl, &fluents);
                let a = body(rng, &all, &all).unwrap_or_else(|| any_atom(rng, &all));
                match g {
                    Some(g) => format!("{kw} {} if {g} after {a}.", atom(rng, hd)),
                    None => format!("{kw} {} after {a}.", atom(rng, hd)),
                }
            }
            _ => match body(rng, &lower_fl, &fluents) {
                Some(g) => format!("{kw} {} if {g}.", atom(rng, hd)),
                None => format!("{kw} {}.", atom(rng, hd)),
            },
        };
        src += &law;
        src.push('\n');
    }
    src
}

pub type Assignment = BTreeMap<Stamped, Value>;

/// Every assignment of the program's stamped signature (finite sorts only).
pub fn assignments(g: &GroundProgram) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    for s in &g.signature {
        let dom = g.description.constant(&s.c.name).and_then(|d| d.sort.domain()).expect("finite sort");
        out = out
            .into_iter()
            .flat_map(|a| {
                dom.iter().map(move |v| {
                    let mut a = a.clone();
                    a.insert(s.clone(), v.clone());
                    a
                })
            })
            .collect();
    }
    out
}

pub fn interpretation(a: &Assignment) -> Interpretation {
    let mut i = Interpretation::new();
    for (s, v) in a {
        i.consts.insert(s.clone(), Val::from(v));
    }
    i
}

fn holds(f: &Formula, i: &Interpretation) -> bool {
    eval_formula(f, i).expect("closed finite formula")
}

fn head_atom(r: &Rule) -> Option<(Stamped, Value)> {
    match &r.head {
        Formula::Cmp(Term::Const(c), Rel::Eq, Term::Lit(v)) => {
            Some((hybrid_cplus::ground::stamped_of(c).unwrap(), v.clone()))
        }
        _ => None,
    }
}

/// Causal-theory stability: the heads of the rules whose bodies hold in `a` (choice heads only when
/// already true) must hold in `a` and pin down every intensional constant.
pub fn is_stable(g: &GroundProgram, a: &Assignment) -> bool {
    let i = interpretation(a);
    let mut determined = std::collections::BTreeSet::new();
    for r in &g.rules {
        if !holds(&r.body, &i) {
            continue;
        }
        if r.choice && !holds(&r.head, &i) {
            continue;
        }
        match head_atom(r) {
            None => return false,
            Some((c, v)) => {
                if a[&c] != v {
                    return false;
                }
                determined.insert(c);
            }
        }
    }
    g.intensional().iter().all(|c| determined.contains(c))
}

pub fn satisfies_completion(cs: &CompletedSystem, a: &Assignment) -> bool {
    let i = interpretation(a);
    cs.constraints.iter().all(|c| holds(&c.formula, &i))
}

/// Compares completion models with stable models for one seeded description at `m ∈ {0, 1}`;
/// returns (stable assignments, all assignments) on agreement.
pub fn completion_vs_stable(seed: u64, max_consts: usize) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = tiny_description_sized(&mut rng, max_consts);
    let p = parse_description(&src, "tiny.cp").map_err(|e| format!("{e}\n{src}"))?;
    let b = expand_abbreviations(&p.description).map_err(|e| format!("{e}\n{src}"))?;
    let (mut stable, mut total) = (0, 0);
    for m in 0..=1 {
        let g = build_Dm(&b, m);
        let cs = complete(&g).map_err(|e| format!("{e}\n{src}"))?;
        for a in assignments(&g) {
            let (sm, comp) = (is_stable(&g, &a), satisfies_completion(&cs, &a));
            stable += sm as usize;
            total += 1;
            if sm != comp {
                return Err(format!("seed {seed}, m = {m}: stable {sm}, completion {comp} at {a:?}\n{src}\n{cs}"));
            }
        }
    }
    Ok((stable, total))
}
