//! Numeric back end for the ODE fragment: fixed-step RK4 integration, dense invariant monitoring
//! with `delta` slack, and plan replay against a completed description or an automaton.

mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use num_traits::Zero;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::ir::eval::{eval_term, Interpretation};
use crate::ir::formula::{Formula, Rel, Term};
use crate::ir::sort::{GroundConst, Stamped};
use crate::ir::value::{Number, Rat, Val, Value};

pub use validate::{validate_all, validate_ha, validate_plan};

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("cannot evaluate `{what}` at t = {t}: {msg}")]
    Eval { what: String, t: f64, msg: String },
    #[error("non-finite value of {name} at t = {t}")]
    NonFinite { name: String, t: f64 },
    #[error("`{0}` mentions constants other than the integrated fluents")]
    NonFluent(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no flow for mode {0}")]
    MissingFlow(Value),
    #[error("cannot evaluate `{formula}`: {msg}")]
    Formula { formula: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeOptions {
    /// Slack on arithmetic atoms.
    pub delta: f64,
    /// Fixed step; `None` uses `δ/1000` capped at `1e-2`.
    pub h: Option<f64>,
}

impl OdeOptions {
    pub fn new(delta: f64) -> OdeOptions {
        OdeOptions { delta, h: None }
    }

    pub fn step_for(&self, duration: f64) -> f64 {
        self.h.unwrap_or_else(|| (duration / 1000.0).min(1e-2))
    }
}

/// Per-mode right-hand sides over unstamped fluents.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub names: Vec<GroundConst>,
    pub rhs: Vec<Term>,
}

impl VectorField {
    fn env(&self, x: &[Number]) -> Interpretation {
        let mut i = Interpretation::new();
        for (n, v) in self.names.iter().zip(x) {
            i.set(None, n.clone(), Val::Num(v.clone()));
        }
        i
    }

    fn eval(&self, x: &[Number], t: f64) -> Result<Vec<Number>, OdeError> {
        let env = self.env(x);
        self.rhs
            .iter()
            .map(|r| match eval_term(r, &env) {
                Ok(Val::Num(n)) => Ok(n),
                Ok(v) => Err(OdeError::Eval { what: r.to_string(), t, msg: format!("value {v} is not a number") }),
                Err(e) => Err(OdeError::Eval { what: r.to_string(), t, msg: e.to_string() }),
            })
            .collect()
    }

    fn eval_f64(&self, x: &[f64], t: f64) -> Result<Vec<f64>, OdeError> {
        let xs: Vec<Number> = x.iter().map(|v| Number::Approx(*v)).collect();
        let d: Vec<f64> = self.eval(&xs, t)?.iter().map(Number::to_f64).collect();
        for (n, v) in self.names.iter().zip(&d) {
            if !v.is_finite() {
                return Err(OdeError::NonFinite { name: n.to_string(), t });
            }
        }
        Ok(d)
    }

    fn state_free(&self) -> bool {
        self.rhs.iter().all(|r| {
            let mut free = true;
            r.visit(&mut |s| {
                if let Term::Const(c) = s {
                    if self.names.iter().any(|n| n.name == c.name) {
                        free = false;
                    }
                }
            });
            free
        })
    }
}

/// Samples of one continuous transition; `end` is exact when the field allows it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: Value,
    pub names: Vec<GroundConst>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub end: Vec<Number>,
}

impl Trajectory {
    fn point(mode: &Value, names: &[GroundConst], x0: &[Number]) -> Trajectory {
        Trajectory {
            mode: mode.clone(),
            names: names.to_vec(),
            times: vec![0.0],
            states: vec![x0.iter().map(Number::to_f64).collect()],
            end: x0.to_vec(),
        }
    }

    /// Straight line from `x0` to `x1` sampled at `samples + 1` points.
    pub fn linear(mode: &Value, names: &[GroundConst], x0: &[Number], x1: &[Number], delta: f64, samples: usize) -> Trajectory {
        let (a, b): (Vec<f64>, Vec<f64>) = (x0.iter().map(Number::to_f64).collect(), x1.iter().map(Number::to_f64).collect());
        let mut t = Trajectory::point(mode, names, x0);
        t.times.clear();
        t.states.clear();
        for k in 0..=samples {
            let s = k as f64 / samples as f64;
            t.times.push(s * delta);
            t.states.push(a.iter().zip(&b).map(|(p, q)| p + s * (q - p)).collect());
        }
        t.end = x1.to_vec();
        t
    }
}

/// Classical RK4 with fixed step `h`; the last step is shortened to land on `delta`.
/// A state-free field with exact data is integrated exactly.
pub fn integrate(field: &VectorField, mode: &Value, x0: &[Number], delta: &Number, h: f64) -> Result<Trajectory, OdeError> {
    if x0.len() != field.names.len() {
        return Err(OdeError::Dimension(format!("{} initial values for {} fluents", x0.len(), field.names.len())));
    }
    let d = delta.to_f64();
    if delta.is_zero() || d <= 0.0 {
        return Ok(Trajectory::point(mode, &field.names, x0));
    }
    let n = ((d / h) - 1e-9).ceil().max(1.0) as usize;
    let grid = |k: usize| if k == n { d } else { k as f64 * h };
    let mut traj = Trajectory::point(mode, &field.names, x0);
    if field.state_free() {
        let c = field.eval(x0, 0.0)?;
        if let (Number::Exact(dr), true, true) = (delta, c.iter().all(Number::is_exact), x0.iter().all(Number::is_exact)) {
            let at = |t: Rat| -> Vec<Number> { x0.iter().zip(&c).map(|(x, r)| x.add(&r.mul(&Number::Exact(t.clone())))).collect() };
            for k in 1..=n {
                traj.times.push(grid(k));
                let t = if k == n { dr.clone() } else { Rat::from_integer((k as i64).into()) * dr / Rat::from_integer((n as i64).into()) };
                traj.states.push(at(t).iter().map(Number::to_f64).collect());
            }
            traj.end = at(dr.clone());
            return Ok(traj);
        }
    }
    let mut x: Vec<f64> = traj.states[0].clone();
    // compensated accumulation keeps roundoff below the truncation error
    let mut comp = vec![0.0; x.len()];
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for k in 1..=n {
        let t0 = grid(k - 1);
        let step = grid(k) - t0;
        let k1 = field.eval_f64(&x, t0)?;
        let k2 = field.eval_f64(&axpy(&x, &k1, step / 2.0), t0 + step / 2.0)?;
        let k3 = field.eval_f64(&axpy(&x, &k2, step / 2.0), t0 + step / 2.0)?;
        let k4 = field.eval_f64(&axpy(&x, &k3, step), t0 + step)?;
        for j in 0..x.len() {
            let inc = step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) - comp[j];
            let sum = x[j] + inc;
            comp[j] = (sum - x[j]) - inc;
            x[j] = sum;
        }
        traj.times.push(grid(k));
        traj.states.push(x.clone());
    }
    traj.end = x.into_iter().map(Number::Approx).collect();
    Ok(traj)
}

/// Satisfaction levels ordered from worst to best.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Violated,
    /// Holds only after weakening arithmetic atoms by `delta`.
    Weak,
    Holds,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Judgement {
    pub status: Status,
    /// Signed robustness: positive inside, negative outside.
    pub margin: f64,
}

impl Judgement {
    fn of(b: bool) -> Judgement {
        if b {
            Judgement { status: Status::Holds, margin: f64::INFINITY }
        } else {
            Judgement { status: Status::Violated, margin: f64::NEG_INFINITY }
        }
    }

    fn neg(self) -> Judgement {
        let status = match self.status {
            Status::Holds => Status::Violated,
            Status::Violated => Status::Holds,
            Status::Weak => Status::Weak,
        };
        Judgement { status, margin: -self.margin }
    }
}

pub(crate) struct Judge<'a> {
    pub env: &'a Interpretation,
    pub delta: f64,
    /// Whether an equality atom may be met within `delta` rather than exactly.
    pub slack: &'a dyn Fn(&Formula) -> bool,
}

fn is_marker(f: &Formula) -> bool {
    match f {
        Formula::Integral(_) | Formula::Dense(_) => true,
        Formula::Not(g) => is_marker(g),
        _ => f.has_marker(),
    }
}

impl Judge<'_> {
    fn eval(&self, t: &Term, f: &Formula) -> Result<Val, OdeError> {
        eval_term(t, self.env).map_err(|e| OdeError::Formula { formula: f.to_string(), msg: e.to_string() })
    }

    fn atom(&self, f: &Formula, negated: bool) -> Result<Judgement, OdeError> {
        let Formula::Cmp(a, r, b) = f else { unreachable!() };
        let (x, y) = (self.eval(a, f)?, self.eval(b, f)?);
        let (Val::Num(x), Val::Num(y)) = (&x, &y) else {
            let same = x.same(&y).filter(|_| *r == Rel::Eq).ok_or_else(|| OdeError::Formula {
                formula: f.to_string(),
                msg: format!("cannot compare {x} with {y}"),
            })?;
            return Ok(Judgement::of(same != negated));
        };
        let e = x.sub(y);
        let ef = e.to_f64();
        let ord = e.cmp_num(&Number::Exact(Rat::zero()));
        let Some(ord) = ord else {
            return Err(OdeError::Formula { formula: f.to_string(), msg: "NaN".into() });
        };
        let d = self.delta;
        let j = |status, margin| Ok(Judgement { status, margin });
        if *r == Rel::Eq {
            let holds = ord.is_eq();
            if negated {
                return match (holds, ef.abs() > d) {
                    (false, true) => j(Status::Holds, ef.abs()),
                    (false, false) => j(Status::Weak, ef.abs()),
                    (true, _) => j(if e.is_exact() { Status::Violated } else { Status::Weak }, 0.0),
                };
            }
            let status = if holds || (ef.abs() <= d && ((self.slack)(f) || !e.is_exact())) {
                Status::Holds
            } else if ef.abs() <= d {
                Status::Weak
            } else {
                Status::Violated
            };
            return j(status, -ef.abs());
        }
        let margin = match r {
            Rel::Gt | Rel::Ge => ef,
            _ => -ef,
        };
        let status = if r.holds(ord) {
            Status::Holds
        } else if margin >= -d {
            Status::Weak
        } else {
            Status::Violated
        };
        j(status, margin)
    }

    /// Three-valued evaluation of a formula in negation normal form; markers go to `marker`, and
    /// only when the rest of their connective leaves the value open.
    pub fn judge(
        &self,
        f: &Formula,
        marker: &mut dyn FnMut(&Formula) -> Result<Judgement, OdeError>,
    ) -> Result<Judgement, OdeError> {
        match f {
            Formula::True => Ok(Judgement::of(true)),
            Formula::False => Ok(Judgement::of(false)),
            Formula::Cmp(..) => self.atom(f, false),
            Formula::Not(g) => match &**g {
                Formula::Cmp(..) => self.atom(g, true),
                Formula::Integral(_) | Formula::Dense(_) => Ok(marker(g)?.neg()),
                g => Ok(self.judge(&g.nnf(), marker)?.neg()),
            },
            Formula::Integral(_) | Formula::Dense(_) => marker(f),
            Formula::Implies(..) => self.judge(&f.nnf(), marker),
            Formula::And(v) | Formula::Or(v) => {
                let conj = matches!(f, Formula::And(_));
                let (plain, marked): (Vec<&Formula>, Vec<&Formula>) = v.iter().partition(|g| !is_marker(g));
                let mut acc = Judgement::of(conj);
                let mut err = None;
                for g in plain.into_iter().chain(marked) {
                    match self.judge(g, marker) {
                        Ok(j) => {
                            let better = if conj { j.status < acc.status || (j.status == acc.status && j.margin < acc.margin) } else { j.status > acc.status || (j.status == acc.status && j.margin > acc.margin) };
                            if better {
                                acc = j;
                            }
                            let decided = if conj { acc.status == Status::Violated } else { acc.status == Status::Holds };
                            if decided {
                                return Ok(acc);
                            }
                        }
                        Err(e) => {
                            err.get_or_insert(e);
                        }
                    }
                }
                match err {
                    Some(e) => Err(e),
                    None => Ok(acc),
                }
            }
        }
    }
}

/// First sample at which a dense check fails, with the state there.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWitness {
    pub time: f64,
    pub state: BTreeMap<String, f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseReport {
    pub status: Status,
    /// Minimum margin over the samples; `+∞` for `⊤`.
    pub min_margin: f64,
    pub first_violation: Option<SampleWitness>,
}

/// Drops time stamps so a body over `i:x` reads the samples of `x`.
pub fn unstamp(f: &Formula) -> Formula {
    f.transform_terms(&mut |t| match t {
        Term::Const(c) if c.step.is_some() => {
            Some(Term::Const(crate::ir::formula::ConstRef { step: None, ..c.clone() }))
        }
        _ => None,
    })
}

/// Evaluates `f` at every sample with arithmetic atoms weakened by `delta`.
pub fn check_dense_invariant(traj: &Trajectory, f: &Formula, delta: f64) -> Result<DenseReport, OdeError> {
    let f = unstamp(f).nnf();
    if let Some(c) = f.constants().into_iter().find(|c| !traj.names.iter().any(|n| n.name == c.name)) {
        return Err(OdeError::NonFluent(format!("{f} ({c})")));
    }
    let mut report = DenseReport { status: Status::Holds, min_margin: f64::INFINITY, first_violation: None };
    let slack = |_: &Formula| true;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let mut env = Interpretation::new();
        for (n, v) in traj.names.iter().zip(x) {
            env.set(None, n.clone(), Val::approx(*v));
        }
        let judge = Judge { env: &env, delta, slack: &slack };
        let j = judge.judge(&f, &mut |m| Err(OdeError::NonFluent(m.to_string())))?;
        report.min_margin = report.min_margin.min(j.margin);
        if j.status < report.status {
            report.status = j.status;
        }
        if j.status == Status::Violated && report.first_violation.is_none() {
            report.first_violation = Some(SampleWitness {
                time: *t,
                state: traj.names.iter().map(|n| n.to_string()).zip(x.iter().copied()).collect(),
                margin: j.margin,
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid,
    UnknownWithinDelta,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
            Verdict::UnknownWithinDelta => "unknown-within-delta",
        })
    }
}

/// A failed check: where, what, and the sampled state when the failure is inside a flow.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub step: Option<u32>,
    pub formula: String,
    pub sample: Option<SampleWitness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub label: String,
    pub mode: Option<Value>,
    /// Largest endpoint mismatch between integration and the plan's post-state.
    pub boundary_error: Option<f64>,
    /// Smallest dense-invariant margin along the flow.
    pub min_margin: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub delta: f64,
    pub steps: Vec<StepRecord>,
    pub violation: Option<Violation>,
    /// Checks met only within `delta`.
    pub weak: Vec<String>,
    pub trajectories: Vec<(u32, Trajectory)>,
}

impl ValidationReport {
    pub fn to_json(&self) -> Json {
        let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map_or(Json::Null, |v| json!(v));
        json!({
            "verdict": self.verdict.to_string(),
            "delta": self.delta,
            "steps": self.steps.iter().map(|s| json!({
                "step": s.step,
                "label": s.label,
                "mode": s.mode.as_ref().map(|m| m.to_string()),
                "boundary_error": num(s.boundary_error),
                "min_margin": num(s.min_margin),
            })).collect::<Vec<_>>(),
            "violation": self.violation.as_ref().map(|v| json!({
                "step": v.step,
                "formula": v.formula,
                "time": v.sample.as_ref().map(|w| w.time),
                "state": v.sample.as_ref().map(|w| json!(w.state)),
                "margin": v.sample.as_ref().map(|w| num(Some(w.margin))),
            })),
            "weak": self.weak,
        })
    }

    /// CSV rows `step,mode,t,<fluents>` for every sampled flow.
    pub fn write_trace(&self, mut w: impl Write) -> Result<(), OdeError> {
        let names: Vec<String> = self.trajectories.first().map(|(_, t)| t.names.iter().map(|n| n.to_string()).collect()).unwrap_or_default();
        writeln!(w, "step,mode,t,{}", names.join(","))?;
        for (i, tr) in &self.trajectories {
            for (t, x) in tr.times.iter().zip(&tr.states) {
                let vals: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{i},{},{t},{}", tr.mode, vals.join(","))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {} (delta = {})", self.verdict, self.delta)?;
        for s in &self.steps {
            write!(f, "step {}: {}", s.step, s.label)?;
            if let Some(m) = &s.mode {
                write!(f, " in mode {m}")?;
            }
            if let Some(e) = s.boundary_error {
                write!(f, ", endpoint error {e:.3e}")?;
            }
            if let Some(m) = s.min_margin.filter(|m| m.is_finite()) {
                write!(f, ", min invariant margin {m:.6}")?;
            }
            writeln!(f)?;
        }
        for w in &self.weak {
            writeln!(f, "within delta only: {w}")?;
        }
        if let Some(v) = &self.violation {
            match v.step {
                Some(i) => write!(f, "violation at step {i}: {}", v.formula)?,
                None => write!(f, "violation: {}", v.formula)?,
            }
            if let Some(w) = &v.sample {
                let st: Vec<String> = w.state.iter().map(|(k, x)| format!("{k} = {x:.6}")).collect();
                write!(f, " at t = {:.6} ({})", w.time, st.join(", "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub(crate) fn stamped_val(env: &Interpretation, s: &Stamped) -> Option<Number> {
    env.get(s).and_then(Val::as_number).cloned()
}
