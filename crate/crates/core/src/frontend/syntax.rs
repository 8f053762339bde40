//! Untyped syntax tree produced by the recursive-descent parser.

use crate::ir::formula::Rel;
use crate::ir::value::Rat;

use super::lexer::{ErrorKind, ParseError, SourceSpan, Tok, Token};

#[derive(Clone, Debug)]
pub enum ExprKind {
    Num(Rat),
    Ident(String, Vec<Expr>),
    Primed(String),
    /// `-e` or `~e`
    Neg(Box<Expr>),
    Tilde(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Cmp(Rel, Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    Arith(crate::ir::formula::ArithOp, Box<Expr>, Box<Expr>),
    Stamp(u32, Box<Expr>),
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub enum RawSort {
    Named(String),
    /// `real[lo..hi]`
    Interval(Rat, Rat),
    /// bare `lo..hi`
    Range(Rat, Rat),
    /// `integer[lo..hi]`
    Integer(Rat, Rat),
    Real,
    NonNegReal,
    Boolean,
}

#[derive(Clone, Debug)]
pub struct RawConst {
    pub name: String,
    pub arg_sorts: Vec<String>,
    pub kind: String,
    pub sort: Option<RawSort>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub enum RawObject {
    Name(String),
    Int(Rat),
    Range(Rat, Rat),
}

#[derive(Clone, Debug)]
pub enum RawLaw {
    Caused { head: Expr, if_: Option<Expr>, after: Option<Expr> },
    Constraint { f: Expr, after: Option<Expr> },
    Nonexecutable { f: Expr, if_: Option<Expr> },
    Causes { cause: Expr, effect: Expr, if_: Option<Expr> },
    Default { f: Expr, if_: Option<Expr>, after: Option<Expr> },
    Exogenous { c: Expr, if_: Option<Expr> },
    Inertial { c: Expr, if_: Option<Expr> },
    Rate { fluent: Expr, rhs: Expr, mode: Expr },
    AlwaysT { body: Expr, mode: Expr },
}

#[derive(Clone, Debug)]
pub enum QueryItem {
    Label(String),
    Maxstep(u32),
    Formula(Expr),
}

#[derive(Clone, Debug)]
pub enum Stmt {
    Sorts(Vec<(String, SourceSpan)>),
    Objects(Vec<(Vec<RawObject>, String, SourceSpan)>),
    Constants(Vec<RawConst>),
    Variables(Vec<(Vec<String>, Option<RawSort>, SourceSpan)>),
    Query(Vec<QueryItem>, SourceSpan),
    Law(RawLaw, SourceSpan),
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

const KEYWORDS: &[&str] = &["if", "after", "causes", "is", "of"];

impl Parser {
    pub fn new(toks: Vec<Token>) -> Parser {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, what: &str) -> PResult<T> {
        Err(ParseError::new(ErrorKind::Syntax, &self.span(), format!("expected {what}, found {}", self.peek())))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(&format!("`{p}`"))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.error(&format!("`{w}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.span();
                self.bump();
                Ok((s, sp))
            }
            _ => self.error("an identifier"),
        }
    }

    fn number(&mut self) -> PResult<Rat> {
        let neg = self.eat_punct("-");
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(if neg { -r } else { r })
            }
            _ => self.error("a number"),
        }
    }

    pub fn parse_file(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![];
        while *self.peek() != Tok::Eof {
            if self.eat_punct(":-") {
                let (sec, sp) = self.ident()?;
                out.push(match sec.as_str() {
                    "sorts" => self.sorts()?,
                    "objects" => self.objects()?,
                    "constants" => self.constants()?,
                    "variables" => self.variables()?,
                    "query" => self.query(sp)?,
                    _ => return Err(ParseError::new(ErrorKind::UnknownSection, &sp, format!("unknown section `{sec}`"))),
                });
            } else {
                let sp = self.span();
                let law = self.law()?;
                self.expect_punct(".")?;
                out.push(Stmt::Law(law, sp));
            }
        }
        Ok(out)
    }

    /// Entries separated by `;` and terminated by `.`.
    fn entries<T>(&mut self, mut one: impl FnMut(&mut Parser) -> PResult<T>) -> PResult<Vec<T>> {
        let mut v = vec![one(self)?];
        loop {
            if self.eat_punct(".") {
                return Ok(v);
            }
            self.expect_punct(";")?;
            v.push(one(self)?);
        }
    }

    fn sorts(&mut self) -> PResult<Stmt> {
        let mut names = vec![];
        for group in self.entries(|p| {
            let mut g = vec![p.ident()?];
            while p.eat_punct(",") {
                g.push(p.ident()?);
            }
            Ok(g)
        })? {
            names.extend(group);
        }
        Ok(Stmt::Sorts(names))
    }

    fn object(&mut self) -> PResult<RawObject> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(RawObject::Name(s))
            }
            _ => {
                let lo = self.number()?;
                if self.eat_punct("..") {
                    Ok(RawObject::Range(lo, self.number()?))
                } else {
                    Ok(RawObject::Int(lo))
                }
            }
        }
    }

    fn objects(&mut self) -> PResult<Stmt> {
        Ok(Stmt::Objects(self.entries(|p| {
            let sp = p.span();
            let mut objs = vec![p.object()?];
            while p.eat_punct(",") {
                objs.push(p.object()?);
            }
            p.expect_punct("::")?;
            let (sort, _) = p.ident()?;
            Ok((objs, sort, sp))
        })?))
    }

    fn raw_sort(&mut self) -> PResult<RawSort> {
        if matches!(self.peek(), Tok::Num(_)) || self.is_punct("-") {
            let lo = self.number()?;
            self.expect_punct("..")?;
            return Ok(RawSort::Range(lo, self.number()?));
        }
        let (name, _) = self.ident()?;
        if self.eat_punct("[") {
            let lo = self.number()?;
            self.expect_punct("..")?;
            let hi = self.number()?;
            self.expect_punct("]")?;
            return match name.as_str() {
                "real" => Ok(RawSort::Interval(lo, hi)),
                "integer" => Ok(RawSort::Integer(lo, hi)),
                _ => self.error("`real[` or `integer[`"),
            };
        }
        Ok(match name.as_str() {
            "real" => RawSort::Real,
            "nonnegReal" => RawSort::NonNegReal,
            "boolean" => RawSort::Boolean,
            _ => RawSort::Named(name),
        })
    }

    fn constants(&mut self) -> PResult<Stmt> {
        let groups = self.entries(|p| {
            let mut names = vec![];
            loop {
                let (n, sp) = p.ident()?;
                let mut args = vec![];
                if p.eat_punct("(") {
                    args.push(p.ident()?.0);
                    while p.eat_punct(",") {
                        args.push(p.ident()?.0);
                    }
                    p.expect_punct(")")?;
                }
                names.push((n, args, sp));
                if !p.eat_punct(",") {
                    break;
                }
            }
            p.expect_punct("::")?;
            let (kind, _) = p.ident()?;
            let sort = if p.eat_punct("(") {
                let s = p.raw_sort()?;
                p.expect_punct(")")?;
                Some(s)
            } else {
                None
            };
            Ok(names
                .into_iter()
                .map(|(name, arg_sorts, span)| RawConst { name, arg_sorts, kind: kind.clone(), sort: sort.clone(), span })
                .collect::<Vec<_>>())
        })?;
        Ok(Stmt::Constants(groups.into_iter().flatten().collect()))
    }

    fn variables(&mut self) -> PResult<Stmt> {
        Ok(Stmt::Variables(self.entries(|p| {
            let sp = p.span();
            let mut names = vec![p.ident()?.0];
            while p.eat_punct(",") {
                names.push(p.ident()?.0);
            }
            let sort = if p.eat_punct("::") { Some(p.raw_sort()?) } else { None };
            Ok((names, sort, sp))
        })?))
    }

    fn query(&mut self, sp: SourceSpan) -> PResult<Stmt> {
        let items = self.entries(|p| {
            if matches!(p.peek_at(1), Tok::Punct("::")) {
                let (key, ksp) = p.ident()?;
                p.bump();
                match key.as_str() {
                    "label" => Ok(QueryItem::Label(p.ident()?.0)),
                    "maxstep" => match p.peek().clone() {
                        Tok::Num(r) if r.is_integer() && r >= Rat::from_integer(0.into()) => {
                            p.bump();
                            Ok(QueryItem::Maxstep(r.to_integer().try_into().unwrap_or(u32::MAX)))
                        }
                        _ => p.error("a non-negative integer"),
                    },
                    _ => Err(ParseError::new(ErrorKind::Syntax, &ksp, format!("unknown query key `{key}`"))),
                }
            } else {
                Ok(QueryItem::Formula(p.formula()?))
            }
        })?;
        Ok(Stmt::Query(items, sp))
    }

    fn opt_if(&mut self) -> PResult<Option<Expr>> {
        if self.eat_word("if") {
            Ok(Some(self.formula()?))
        } else {
            Ok(None)
        }
    }

    fn opt_after(&mut self) -> PResult<Option<Expr>> {
        if self.eat_word("after") {
            Ok(Some(self.formula()?))
        } else {
            Ok(None)
        }
    }

    fn law(&mut self) -> PResult<RawLaw> {
        if self.eat_word("caused") {
            let head = self.formula()?;
            let if_ = self.opt_if()?;
            let after = self.opt_after()?;
            return Ok(RawLaw::Caused { head, if_, after });
        }
        if self.eat_word("constraint") {
            let f = self.formula()?;
            return Ok(RawLaw::Constraint { f, after: self.opt_after()? });
        }
        if self.eat_word("nonexecutable") {
            let f = self.formula()?;
            return Ok(RawLaw::Nonexecutable { f, if_: self.opt_if()? });
        }
        if self.eat_word("default") {
            let f = self.formula()?;
            let if_ = self.opt_if()?;
            return Ok(RawLaw::Default { f, if_, after: self.opt_after()? });
        }
        if self.eat_word("exogenous") {
            let c = self.unary()?;
            return Ok(RawLaw::Exogenous { c, if_: self.opt_if()? });
        }
        if self.eat_word("inertial") {
            let c = self.unary()?;
            return Ok(RawLaw::Inertial { c, if_: self.opt_if()? });
        }
        if self.is_word("derivative") && matches!(self.peek_at(1), Tok::Ident(w) if w == "of") {
            self.bump();
            self.bump();
            let fluent = self.unary()?;
            self.expect_word("is")?;
            let rhs = self.additive()?;
            self.expect_word("if")?;
            return Ok(RawLaw::Rate { fluent, rhs, mode: self.formula()? });
        }
        if self.eat_word("always_t") {
            let body = self.formula()?;
            self.expect_word("if")?;
            return Ok(RawLaw::AlwaysT { body, mode: self.formula()? });
        }
        let cause = self.formula()?;
        if self.eat_word("causes") {
            let effect = self.formula()?;
            return Ok(RawLaw::Causes { cause, effect, if_: self.opt_if()? });
        }
        self.error("a causal law")
    }

    pub fn formula(&mut self) -> PResult<Expr> {
        let sp = self.span();
        let lhs = self.disjunction()?;
        if self.eat_punct("->>") {
            let rhs = self.formula()?;
            return Ok(Expr { kind: ExprKind::Implies(Box::new(lhs), Box::new(rhs)), span: sp });
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Expr> {
        let sp = self.span();
        let mut v = vec![self.conjunction()?];
        while self.eat_punct("++") {
            v.push(self.conjunction()?);
        }
        Ok(if v.len() == 1 { v.pop().unwrap() } else { Expr { kind: ExprKind::Or(v), span: sp } })
    }

    fn conjunction(&mut self) -> PResult<Expr> {
        let sp = self.span();
        let mut v = vec![self.comparison()?];
        while self.eat_punct("&") {
            v.push(self.comparison()?);
        }
        Ok(if v.len() == 1 { v.pop().unwrap() } else { Expr { kind: ExprKind::And(v), span: sp } })
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let sp = self.span();
        let lhs = self.additive()?;
        let rel = match self.peek() {
            Tok::Punct("=") => Some(Rel::Eq),
            Tok::Punct("<") => Some(Rel::Lt),
            Tok::Punct("<=") => Some(Rel::Le),
            Tok::Punct(">") => Some(Rel::Gt),
            Tok::Punct(">=") => Some(Rel::Ge),
            Tok::Punct("!=") => None,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        let kind = match rel {
            Some(r) => ExprKind::Cmp(r, Box::new(lhs), Box::new(rhs)),
            None => ExprKind::Ne(Box::new(lhs), Box::new(rhs)),
        };
        Ok(Expr { kind, span: sp })
    }

    fn additive(&mut self) -> PResult<Expr> {
        use crate::ir::formula::ArithOp;
        let sp = self.span();
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => ArithOp::Add,
                Tok::Punct("-") => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr { kind: ExprKind::Arith(op, Box::new(lhs), Box::new(rhs)), span: sp.clone() };
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        use crate::ir::formula::ArithOp;
        let sp = self.span();
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => ArithOp::Mul,
                Tok::Punct("/") | Tok::Punct("//") => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr { kind: ExprKind::Arith(op, Box::new(lhs), Box::new(rhs)), span: sp.clone() };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let sp = self.span();
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(e)), span: sp });
        }
        if self.eat_punct("~") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Tilde(Box::new(e)), span: sp });
        }
        if let (Tok::Num(r), Tok::Punct(":")) = (self.peek().clone(), self.peek_at(1).clone()) {
            if r.is_integer() && r >= Rat::from_integer(0.into()) {
                self.bump();
                self.bump();
                let e = self.primary()?;
                let step = r.to_integer().try_into().unwrap_or(u32::MAX);
                return Ok(Expr { kind: ExprKind::Stamp(step, Box::new(e)), span: sp });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let sp = self.span();
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Num(r), span: sp })
            }
            Tok::Primed(s) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Primed(s), span: sp })
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                let mut args = vec![];
                if self.eat_punct("(") {
                    args.push(self.formula()?);
                    while self.eat_punct(",") {
                        args.push(self.formula()?);
                    }
                    self.expect_punct(")")?;
                }
                Ok(Expr { kind: ExprKind::Ident(s, args), span: sp })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.formula()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.error("an expression"),
        }
    }

    pub fn at_end(&self) -> bool {
        *self.peek() == Tok::Eof
    }
}
