//! Exact bounded simplex over delta-rationals (`r + k·ε`) with Bland's rule; strict bounds use `ε`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_traits::{One, Signed, Zero};

use crate::ir::formula::Rel;
use crate::ir::value::Rat;

/// `r + k·ε` for a symbolic positive infinitesimal `ε`, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeltaRat {
    pub r: Rat,
    pub k: Rat,
}

impl DeltaRat {
    pub fn new(r: Rat, k: Rat) -> DeltaRat {
        DeltaRat { r, k }
    }

    pub fn zero() -> DeltaRat {
        DeltaRat::new(Rat::zero(), Rat::zero())
    }

    fn scale(&self, c: &Rat) -> DeltaRat {
        DeltaRat::new(&self.r * c, &self.k * c)
    }

    /// Value at a concrete `ε`.
    pub fn at(&self, eps: &Rat) -> Rat {
        &self.r + &self.k * eps
    }
}

impl Add for &DeltaRat {
    type Output = DeltaRat;
    fn add(self, o: &DeltaRat) -> DeltaRat {
        DeltaRat::new(&self.r + &o.r, &self.k + &o.k)
    }
}

impl Sub for &DeltaRat {
    type Output = DeltaRat;
    fn sub(self, o: &DeltaRat) -> DeltaRat {
        DeltaRat::new(&self.r - &o.r, &self.k - &o.k)
    }
}

impl Mul<&Rat> for &DeltaRat {
    type Output = DeltaRat;
    fn mul(self, c: &Rat) -> DeltaRat {
        self.scale(c)
    }
}

/// `Σ coeffs[j]·x_j  rel  rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinCons {
    pub coeffs: BTreeMap<usize, Rat>,
    pub rel: Rel,
    pub rhs: Rat,
}

impl LinCons {
    pub fn new(coeffs: BTreeMap<usize, Rat>, rel: Rel, rhs: Rat) -> LinCons {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        LinCons { coeffs, rel, rhs }
    }

    pub fn holds(&self, x: &[Rat]) -> bool {
        let lhs: Rat = self.coeffs.iter().map(|(j, c)| c * &x[*j]).sum();
        self.rel.holds(lhs.cmp(&self.rhs))
    }
}

struct Tableau {
    /// Basic variable ↦ row over non-basic variables.
    rows: BTreeMap<usize, BTreeMap<usize, Rat>>,
    lower: Vec<Option<DeltaRat>>,
    upper: Vec<Option<DeltaRat>>,
    beta: Vec<DeltaRat>,
}

impl Tableau {
    fn violates(&self, i: usize) -> Option<bool> {
        if self.lower[i].as_ref().is_some_and(|l| self.beta[i] < *l) {
            Some(true)
        } else if self.upper[i].as_ref().is_some_and(|u| self.beta[i] > *u) {
            Some(false)
        } else {
            None
        }
    }

    fn can_increase(&self, j: usize) -> bool {
        self.upper[j].as_ref().is_none_or(|u| self.beta[j] < *u)
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.lower[j].as_ref().is_none_or(|l| self.beta[j] > *l)
    }

    fn pivot_and_update(&mut self, i: usize, j: usize, v: DeltaRat) {
        let a_ij = self.rows[&i][&j].clone();
        let theta = &(&v - &self.beta[i]) * &(Rat::one() / &a_ij);
        self.beta[i] = v;
        self.beta[j] = &self.beta[j] + &theta;
        let others: Vec<(usize, Rat)> =
            self.rows.iter().filter(|(k, _)| **k != i).filter_map(|(k, r)| r.get(&j).map(|a| (*k, a.clone()))).collect();
        for (k, a_kj) in others {
            self.beta[k] = &self.beta[k] + &(&theta * &a_kj);
        }
        self.pivot(i, j);
    }

    /// Swaps basic `i` with non-basic `j`.
    fn pivot(&mut self, i: usize, j: usize) {
        let mut row = self.rows.remove(&i).unwrap();
        let a = row.remove(&j).unwrap();
        // x_j = x_i / a − Σ (a_ik / a) x_k
        let mut new_row: BTreeMap<usize, Rat> = row.into_iter().map(|(k, c)| (k, -c / &a)).collect();
        new_row.insert(i, Rat::one() / &a);
        for r in self.rows.values_mut() {
            if let Some(c) = r.remove(&j) {
                for (k, d) in &new_row {
                    let e = r.entry(*k).or_insert_with(Rat::zero);
                    *e += &c * d;
                    if e.is_zero() {
                        r.remove(k);
                    }
                }
            }
        }
        self.rows.insert(j, new_row);
    }

    fn check(&mut self) -> bool {
        loop {
            let Some((i, below)) = self.rows.keys().find_map(|&i| self.violates(i).map(|b| (i, b))) else {
                return true;
            };
            let row = &self.rows[&i];
            let pick = row.iter().find(|(j, a)| {
                let up = a.is_positive() == below;
                if up { self.can_increase(**j) } else { self.can_decrease(**j) }
            });
            let Some((&j, _)) = pick else { return false };
            let target = if below { self.lower[i].clone() } else { self.upper[i].clone() }.unwrap();
            self.pivot_and_update(i, j, target);
        }
    }
}

/// Finds a rational point satisfying every constraint over `nvars` variables, or `None`.
pub fn solve(nvars: usize, cons: &[LinCons]) -> Option<Vec<Rat>> {
    let mut lower: Vec<Option<DeltaRat>> = vec![None; nvars];
    let mut upper: Vec<Option<DeltaRat>> = vec![None; nvars];
    let mut rows: BTreeMap<usize, BTreeMap<usize, Rat>> = BTreeMap::new();
    let mut slack_of: BTreeMap<Vec<(usize, Rat)>, usize> = BTreeMap::new();
    for c in cons {
        let (var, scale) = match c.coeffs.len() {
            0 => {
                if c.rel.holds(Rat::zero().cmp(&c.rhs)) {
                    continue;
                }
                return None;
            }
            1 => {
                let (j, a) = c.coeffs.iter().next().unwrap();
                (*j, a.clone())
            }
            _ => {
                let key: Vec<(usize, Rat)> = c.coeffs.iter().map(|(j, a)| (*j, a.clone())).collect();
                let s = *slack_of.entry(key).or_insert_with(|| {
                    lower.push(None);
                    upper.push(None);
                    let s = lower.len() - 1;
                    rows.insert(s, c.coeffs.clone());
                    s
                });
                (s, Rat::one())
            }
        };
        // var·scale rel rhs
        let b = &c.rhs / &scale;
        let rel = if scale.is_negative() { c.rel.flip() } else { c.rel };
        let zero = Rat::zero;
        let (lo, hi) = match rel {
            Rel::Eq => (Some(DeltaRat::new(b.clone(), zero())), Some(DeltaRat::new(b, zero()))),
            Rel::Le => (None, Some(DeltaRat::new(b, zero()))),
            Rel::Lt => (None, Some(DeltaRat::new(b, -Rat::one()))),
            Rel::Ge => (Some(DeltaRat::new(b, zero())), None),
            Rel::Gt => (Some(DeltaRat::new(b, Rat::one())), None),
        };
        if let Some(l) = lo {
            if lower[var].as_ref().is_none_or(|o| l > *o) {
                lower[var] = Some(l);
            }
        }
        if let Some(u) = hi {
            if upper[var].as_ref().is_none_or(|o| u < *o) {
                upper[var] = Some(u);
            }
        }
        if let (Some(l), Some(u)) = (&lower[var], &upper[var]) {
            if l > u {
                return None;
            }
        }
    }
    let n = lower.len();
    let mut beta = vec![DeltaRat::zero(); n];
    for j in 0..nvars {
        if let Some(l) = lower[j].as_ref().filter(|l| beta[j] < **l) {
            beta[j] = l.clone();
        } else if let Some(u) = upper[j].as_ref().filter(|u| beta[j] > **u) {
            beta[j] = u.clone();
        }
    }
    for (s, row) in &rows {
        let mut v = DeltaRat::zero();
        for (j, a) in row {
            v = &v + &(&beta[*j] * a);
        }
        beta[*s] = v;
    }
    let mut t = Tableau { rows, lower, upper, beta };
    if !t.check() {
        return None;
    }
    // A concrete ε keeping every bound: for l ≤ β with l.r < β.r and l.k > β.k, ε ≤ (β.r − l.r)/(l.k − β.k).
    let mut eps = Rat::one();
    for i in 0..n {
        let pairs = [(t.lower[i].as_ref(), Some(&t.beta[i])), (Some(&t.beta[i]), t.upper[i].as_ref())];
        for (a, b) in pairs {
            if let (Some(a), Some(b)) = (a, b) {
                if a.r < b.r && a.k > b.k {
                    let e = (&b.r - &a.r) / (&a.k - &b.k);
                    if e < eps {
                        eps = e;
                    }
                }
            }
        }
    }
    Some((0..nvars).map(|j| t.beta[j].at(&eps)).collect())
}
