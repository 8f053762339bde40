//! Terms as rational functions over real variables and formulas as disjunctions of linear systems.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::simplex::LinCons;
use crate::ir::formula::{ArithOp, Formula, Rel, Term};
use crate::ir::value::{f64_to_rat, Rat, Value};

/// Monomial (sorted variable indices with repetition) ↦ coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly(BTreeMap<Vec<usize>, Rat>);

impl Poly {
    pub fn constant(c: Rat) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.0.insert(vec![], c);
        }
        p
    }

    pub fn var(j: usize) -> Poly {
        Poly(BTreeMap::from([(vec![j], Rat::one())]))
    }

    pub fn degree(&self) -> usize {
        self.0.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.degree() {
            0 => Some(self.0.get(&vec![]).cloned().unwrap_or_else(Rat::zero)),
            _ => None,
        }
    }

    fn add_term(&mut self, m: Vec<usize>, c: Rat) {
        let e = self.0.entry(m.clone()).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in &o.0 {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut p = Poly::default();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                let mut m: Vec<usize> = m1.iter().chain(m2).copied().collect();
                m.sort_unstable();
                p.add_term(m, c1 * c2);
            }
        }
        p
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        self.mul(&Poly::constant(c.clone()))
    }

    /// `Σ a_j x_j R −c0` for a polynomial of degree at most one.
    fn atom(&self, r: Rel) -> LinCons {
        let coeffs = self.0.iter().filter(|(m, _)| m.len() == 1).map(|(m, c)| (m[0], c.clone())).collect();
        let c0 = self.0.get(&vec![]).cloned().unwrap_or_else(Rat::zero);
        LinCons::new(coeffs, r, -c0)
    }
}

/// `n / d`; `d` is the constant one unless a variable divides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatFn {
    pub n: Poly,
    pub d: Poly,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinearError {
    #[error("nonlinear arithmetic in `{0}`")]
    Nonlinear(String),
    #[error("`{0}` is not a real-valued term")]
    NotReal(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("`{0}` needs numeric validation; use `validate` or the ODE checker")]
    Marker(String),
}

impl RatFn {
    fn poly(p: Poly) -> RatFn {
        RatFn { n: p, d: Poly::constant(Rat::one()) }
    }

    fn normalize(self) -> RatFn {
        match self.d.as_constant() {
            Some(c) if !c.is_one() && !c.is_zero() => RatFn::poly(self.n.scale(&(Rat::one() / c))),
            _ => self,
        }
    }
}

/// Converts a term whose constants `var` maps to indices into a rational function.
pub fn ratfn(t: &Term, var: &dyn Fn(&Term) -> Option<usize>) -> Result<RatFn, LinearError> {
    if let Some(j) = var(t) {
        return Ok(RatFn::poly(Poly::var(j)));
    }
    Ok(match t {
        Term::Lit(Value::Num(r)) => RatFn::poly(Poly::constant(r.clone())),
        Term::Pi => RatFn::poly(Poly::constant(f64_to_rat(std::f64::consts::PI).unwrap())),
        Term::Neg(a) => {
            let a = ratfn(a, var)?;
            RatFn { n: a.n.neg(), d: a.d }
        }
        Term::Bin(op, a, b) => {
            let (a, b) = (ratfn(a, var)?, ratfn(b, var)?);
            match op {
                ArithOp::Add => RatFn { n: a.n.mul(&b.d).add(&b.n.mul(&a.d)), d: a.d.mul(&b.d) },
                ArithOp::Sub => RatFn { n: a.n.mul(&b.d).sub(&b.n.mul(&a.d)), d: a.d.mul(&b.d) },
                ArithOp::Mul => RatFn { n: a.n.mul(&b.n), d: a.d.mul(&b.d) },
                ArithOp::Div => {
                    if b.n.as_constant().is_some_and(|c| c.is_zero()) {
                        return Err(LinearError::DivisionByZero(t.to_string()));
                    }
                    RatFn { n: a.n.mul(&b.d), d: a.d.mul(&b.n) }
                }
            }
        }
        Term::Func(g, a) => {
            let a = ratfn(a, var)?;
            match (a.n.as_constant(), a.d.as_constant()) {
                (Some(n), Some(d)) => {
                    let x = crate::ir::value::rat_to_f64(&(n / d));
                    let y = f64_to_rat(g.apply(x)).ok_or_else(|| LinearError::NotReal(t.to_string()))?;
                    RatFn::poly(Poly::constant(y))
                }
                _ => return Err(LinearError::Nonlinear(t.to_string())),
            }
        }
        _ => return Err(LinearError::NotReal(t.to_string())),
    }
    .normalize())
}

/// Positive Boolean combination of linear constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lin {
    True,
    False,
    Atom(LinCons),
    And(Vec<Lin>),
    Or(Vec<Lin>),
}

fn poly_atom(p: &Poly, r: Rel) -> Lin {
    match p.as_constant() {
        Some(c) => {
            if r.holds(c.cmp(&Rat::zero())) {
                Lin::True
            } else {
                Lin::False
            }
        }
        None => Lin::Atom(p.atom(r)),
    }
}

/// `a R b` as linear constraints; a linear denominator splits on its sign.
pub fn linear_atom(a: &Term, r: Rel, b: &Term, var: &dyn Fn(&Term) -> Option<usize>) -> Result<Lin, LinearError> {
    let ctx = || format!("{a} {} {b}", r.symbol());
    let (fa, fb) = (ratfn(a, var)?, ratfn(b, var)?);
    let n = fa.n.mul(&fb.d).sub(&fb.n.mul(&fa.d));
    let d = fa.d.mul(&fb.d);
    if n.degree() > 1 || d.degree() > 1 {
        return Err(LinearError::Nonlinear(ctx()));
    }
    match d.as_constant() {
        Some(c) => {
            let r = if c < Rat::zero() { r.flip() } else { r };
            Ok(poly_atom(&n, r))
        }
        None => Ok(Lin::Or(vec![
            Lin::And(vec![poly_atom(&d, Rel::Gt), poly_atom(&n, r)]),
            Lin::And(vec![poly_atom(&d, Rel::Lt), poly_atom(&n, r.flip())]),
        ])),
    }
}

/// Linearizes a marker-free formula whose constants are all real variables.
pub fn linearize(f: &Formula, var: &dyn Fn(&Term) -> Option<usize>) -> Result<Lin, LinearError> {
    lin_nnf(&f.nnf(), var)
}

fn lin_nnf(f: &Formula, var: &dyn Fn(&Term) -> Option<usize>) -> Result<Lin, LinearError> {
    Ok(match f {
        Formula::True => Lin::True,
        Formula::False => Lin::False,
        Formula::Cmp(a, r, b) => linear_atom(a, *r, b, var)?,
        Formula::Not(g) => match &**g {
            Formula::Cmp(a, Rel::Eq, b) => {
                Lin::Or(vec![linear_atom(a, Rel::Lt, b, var)?, linear_atom(a, Rel::Gt, b, var)?])
            }
            Formula::Integral(_) | Formula::Dense(_) => return Err(LinearError::Marker(g.to_string())),
            _ => return Err(LinearError::NotReal(f.to_string())),
        },
        Formula::And(v) => Lin::And(v.iter().map(|g| lin_nnf(g, var)).collect::<Result<_, _>>()?),
        Formula::Or(v) => Lin::Or(v.iter().map(|g| lin_nnf(g, var)).collect::<Result<_, _>>()?),
        Formula::Implies(..) => unreachable!("nnf removes implications"),
        Formula::Integral(_) | Formula::Dense(_) => return Err(LinearError::Marker(f.to_string())),
    })
}

/// Disjunctive normal form; an empty list is unsatisfiable, an empty disjunct is `true`.
pub fn dnf(l: &Lin) -> Vec<Vec<LinCons>> {
    match l {
        Lin::True => vec![vec![]],
        Lin::False => vec![],
        Lin::Atom(c) => vec![vec![c.clone()]],
        Lin::Or(v) => {
            let mut out: Vec<Vec<LinCons>> = v.iter().flat_map(dnf).collect();
            if out.iter().any(Vec::is_empty) {
                return vec![vec![]];
            }
            out.sort();
            out.dedup();
            out
        }
        Lin::And(v) => {
            let mut acc = vec![vec![]];
            for g in v {
                let d = dnf(g);
                acc = acc
                    .iter()
                    .flat_map(|a: &Vec<LinCons>| {
                        d.iter().map(move |b| {
                            let mut c = a.clone();
                            c.extend(b.iter().cloned());
                            c.sort();
                            c.dedup();
                            c
                        })
                    })
                    .collect();
                if acc.is_empty() {
                    return acc;
                }
            }
            acc.sort();
            acc.dedup();
            acc
        }
    }
}
