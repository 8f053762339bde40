//! Parsers for `.cp` action descriptions and JSON hybrid automata.

pub mod ha;
pub mod lexer;
pub mod print;
mod resolve;
pub mod syntax;

use std::sync::Arc;

pub use ha::parse_ha;
pub use lexer::{ErrorKind, ParseError, SourceSpan};
pub use print::{law_to_string, print_description, print_program, print_query};

use crate::ir::law::Program;

/// Parses a `.cp` file into an action description and its query blocks.
pub fn parse_description(text: &str, file: &str) -> Result<Program, ParseError> {
    let file: Arc<str> = file.into();
    let toks = lexer::lex(text, &file)?;
    let stmts = syntax::Parser::new(toks).parse_file()?;
    resolve::resolve(&stmts)
}
