use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value as Json};

use super::sort::GroundConst;
use super::value::{parse_value, Number, Val};

pub type State = BTreeMap<GroundConst, Val>;

#[derive(Clone, Debug)]
pub enum Label {
    Event(String),
    Wait(Number),
}

impl Label {
    pub fn duration(&self) -> Number {
        match self {
            Label::Event(_) => Number::Exact(super::value::rat(0)),
            Label::Wait(d) => d.clone(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Event(e) => f.write_str(e),
            Label::Wait(d) => write!(f, "wait {d}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanStep {
    pub label: Label,
    pub post: State,
}

/// Alternating sequence of states and transition labels.
#[derive(Clone, Debug)]
pub struct Plan {
    pub initial: State,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, thiserror::Error)]
#[error("plan JSON: {0}")]
pub struct PlanJsonError(pub String);

fn state_json(s: &State) -> Json {
    Json::Object(s.iter().map(|(k, v)| (k.to_string(), Json::String(v.to_string()))).collect::<Map<_, _>>())
}

/// Parses `name` or `name(a,b)`.
pub fn parse_ground_const(s: &str) -> GroundConst {
    match s.split_once('(') {
        Some((n, rest)) => GroundConst {
            name: n.trim().to_string(),
            args: rest.trim_end_matches(')').split(',').map(parse_value).collect(),
        },
        None => GroundConst::plain(s.trim()),
    }
}

fn state_from(j: &Json) -> Result<State, PlanJsonError> {
    let obj = j.as_object().ok_or_else(|| PlanJsonError("state must be an object".into()))?;
    let mut s = State::new();
    for (k, v) in obj {
        let text = match v {
            Json::String(t) => t.clone(),
            Json::Number(n) => n.to_string(),
            Json::Bool(b) => b.to_string(),
            _ => return Err(PlanJsonError(format!("bad value for {k}"))),
        };
        s.insert(parse_ground_const(k), Val::from(&parse_value(&text)));
    }
    Ok(s)
}

impl Plan {
    pub fn states(&self) -> impl Iterator<Item = &State> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.post))
    }

    pub fn state(&self, i: usize) -> &State {
        if i == 0 {
            &self.initial
        } else {
            &self.steps[i - 1].post
        }
    }

    /// `{initial: {name: value}, steps: [{label, duration, post}]}` with values as strings.
    pub fn to_json(&self) -> Json {
        json!({
            "initial": state_json(&self.initial),
            "steps": self.steps.iter().map(|s| json!({
                "label": match &s.label { Label::Event(e) => e.clone(), Label::Wait(_) => "wait".to_string() },
                "duration": s.label.duration().to_string(),
                "post": state_json(&s.post),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(j: &Json) -> Result<Plan, PlanJsonError> {
        let initial = state_from(j.get("initial").ok_or_else(|| PlanJsonError("missing `initial`".into()))?)?;
        let steps = j
            .get("steps")
            .and_then(Json::as_array)
            .ok_or_else(|| PlanJsonError("missing `steps` array".into()))?
            .iter()
            .map(|s| {
                let label = s.get("label").and_then(Json::as_str).ok_or_else(|| PlanJsonError("step without label".into()))?;
                let post = state_from(s.get("post").ok_or_else(|| PlanJsonError("step without post".into()))?)?;
                let label = if label == "wait" {
                    let d = match s.get("duration") {
                        Some(Json::String(t)) => t.clone(),
                        Some(Json::Number(n)) => n.to_string(),
                        _ => return Err(PlanJsonError("wait step without duration".into())),
                    };
                    match Val::from(&parse_value(&d)) {
                        Val::Num(n) => Label::Wait(n),
                        _ => return Err(PlanJsonError(format!("bad duration {d}"))),
                    }
                } else {
                    Label::Event(label.to_string())
                };
                Ok(PlanStep { label, post })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Plan { initial, steps })
    }
}
