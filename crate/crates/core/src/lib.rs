//! Hybrid automata in the action language C+ modulo ODE.
//!
//! The pipeline parses `.cp` descriptions or JSON automata ([`frontend`]), translates automata into
//! causal laws ([`translate`]), expands abbreviations ([`desugar`]), grounds and completes the
//! time-stamped program ([`ground`]), and then either emits dReal SMT-LIB ([`emit`]), plans exactly
//! in the linear fragment ([`lraplan`]) or validates plans numerically ([`odecheck`]).

pub mod frontend;
pub mod ir;
pub mod desugar;
pub mod translate;
pub mod ground;
pub mod par;
pub mod emit;
pub mod lraplan;
pub mod odecheck;
