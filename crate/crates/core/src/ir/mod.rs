//! Shared intermediate representation: sorts, constants, formulas, causal laws, automata,
//! interpretations and plans, with evaluation and substitution.

pub mod automaton;
pub mod elim;
pub mod eval;
pub mod formula;
pub mod law;
pub mod plan;
pub mod sort;
pub mod value;

pub use automaton::{Flow, HybridAutomaton, Switch, Witnesses};
pub use eval::{eval_formula, eval_term, fix_constants, stamp, substitute, EvalError, Interpretation};
pub use formula::{ArithOp, ConstRef, DenseMarker, Formula, Func, IntegralMarker, Rel, Term};
pub use law::{ground_instances, ActionDescription, CausalLaw, ModeRef, Program, QueryBlock, VarDecl};
pub use plan::{Label, Plan, PlanStep, State};
pub use sort::{Category, ConstantDecl, GroundConst, Implicit, Sort, SortKind, Stamped};
pub use value::{Number, Rat, Val, Value};
