use std::fmt;
use std::sync::Arc;

use crate::ir::value::{parse_rat, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Syntax,
    UnknownSection,
    Undeclared,
    Arity,
    Sort,
    Schema,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub kind: ErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ErrorKind, span: &SourceSpan, message: impl Into<String>) -> ParseError {
        ParseError { kind, span: span.clone(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `x'`
    Primed(String),
    Num(Rat),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Primed(s) => write!(f, "`{s}'`"),
            Tok::Num(r) => write!(f, "number {r}"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest match first.
const PUNCT: &[&str] = &[
    "->>", ":-", "::", "..", "<=", ">=", "!=", "//", "++", ":", ".", ";", ",", "(", ")", "[", "]", "&", "-", "~", "+", "*",
    "/", "=", "<", ">",
];

pub fn lex(text: &str, file: &Arc<str>) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = vec![];
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let span = |line, column, length| SourceSpan { file: file.clone(), line, column, length };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if i < chars.len() && chars[i] == '\'' {
                i += 1;
                Tok::Primed(word)
            } else {
                Tok::Ident(word)
            };
            out.push(Token { tok, span: span(line, col, i - start) });
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let r = parse_rat(&text).ok_or_else(|| {
                ParseError::new(ErrorKind::Lexical, &span(line, col, i - start), format!("bad number `{text}`"))
            })?;
            out.push(Token { tok: Tok::Num(r), span: span(line, col, i - start) });
        } else {
            let rest: String = chars[i..(i + 3).min(chars.len())].iter().collect();
            match PUNCT.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    i += p.len();
                    out.push(Token { tok: Tok::Punct(p), span: span(line, col, p.len()) });
                }
                None => {
                    return Err(ParseError::new(ErrorKind::Lexical, &span(line, col, 1), format!("unexpected character `{c}`")))
                }
            }
        }
        col += i - start;
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, 0) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_ranges_and_statement_ends() {
        let f: Arc<str> = Arc::from("t");
        let toks: Vec<Tok> = lex("x :: real[0..30]. y=7.5. 6:mode=2.", &f).unwrap().into_iter().map(|t| t.tok).collect();
        assert!(toks.contains(&Tok::Punct("..")));
        assert!(toks.contains(&Tok::Num(parse_rat("7.5").unwrap())));
        assert_eq!(toks.iter().filter(|t| **t == Tok::Punct(".")).count(), 3);
    }

    #[test]
    fn comments_and_positions() {
        let f: Arc<str> = Arc::from("t");
        let toks = lex("% note\n  x1' $", &f);
        let e = toks.unwrap_err();
        assert_eq!((e.span.line, e.span.column), (2, 7));
    }
}
