//! Lexer and recursive-descent parser for types, typed programs (`.ggv`)
//! and untyped programs (`.ugv`).
//!
//! Both languages share one lexer and one grammar; the parser first builds a
//! raw tree with optional annotations and then lowers it, rejecting missing
//! annotations in typed mode and stray ones in untyped mode.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ast::{line_col, ArithOp, Expr, ExprKind, Import, Program, Span, UExpr, UExprKind};
use crate::types::{Branches, Mult, Session, Type};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub msg: String,
    pub line: usize,
    pub col: usize,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Semi,
    Eq,
    EqEq,
    Plus,
    Minus,
    Bang,
    Quest,
    PlusBrace,
    AmpBrace,
    At,
    Backslash,
    Arrow(Mult),
    Star(Mult),
    EndOut,
    EndIn,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Int(n) => write!(f, "`{}`", n),
            Tok::Str(s) => write!(f, "\"{}\"", s),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Quest => f.write_str("`?`"),
            Tok::PlusBrace => f.write_str("`+{`"),
            Tok::AmpBrace => f.write_str("`&{`"),
            Tok::At => f.write_str("`@`"),
            Tok::Backslash => f.write_str("`\\`"),
            Tok::Arrow(m) => write!(f, "`-{}>`", m),
            Tok::Star(m) => write!(f, "`*{}`", m),
            Tok::EndOut => f.write_str("`End!`"),
            Tok::EndIn => f.write_str("`End?`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "lambda_un", "lambda_lin", "lambda", "let", "in", "fork", "new", "send", "receive", "select", "case", "of",
    "close", "wait", "if", "then", "else", "import", "untyped", "as",
];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |msg: String, at: usize| {
        let (line, col) = line_col(src, at);
        ParseError { msg, line, col, span: Span::new(at, at + 1) }
    };
    let rest_is = |i: usize, s: &str| src[i..].starts_with(s);
    let word_ends = |j: usize| j >= bytes.len() || !is_ident_continue(bytes[j] as char);

    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if rest_is(i, "--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if is_ident_start(c) {
            let mut j = i + 1;
            while j < bytes.len() && is_ident_continue(bytes[j] as char) {
                j += 1;
            }
            let word = &src[i..j];
            if word == "End" && j < bytes.len() && (bytes[j] == b'!' || bytes[j] == b'?') {
                let t = if bytes[j] == b'!' { Tok::EndOut } else { Tok::EndIn };
                i = j + 1;
                t
            } else {
                i = j;
                Tok::Ident(word.to_string())
            }
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let n = src[i..j]
                .parse::<i64>()
                .map_err(|_| err(format!("integer literal `{}` out of range", &src[i..j]), i))?;
            i = j;
            Tok::Int(n)
        } else if c == '"' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] != b'"' && bytes[j] != b'\n' {
                j += 1;
            }
            if j >= bytes.len() || bytes[j] != b'"' {
                return Err(err("unterminated string literal".into(), i));
            }
            let s = src[i + 1..j].to_string();
            i = j + 1;
            Tok::Str(s)
        } else if rest_is(i, "-un>") {
            i += 4;
            Tok::Arrow(Mult::Un)
        } else if rest_is(i, "-lin>") {
            i += 5;
            Tok::Arrow(Mult::Lin)
        } else if rest_is(i, "*un") && word_ends(i + 3) {
            i += 3;
            Tok::Star(Mult::Un)
        } else if rest_is(i, "*lin") && word_ends(i + 4) {
            i += 4;
            Tok::Star(Mult::Lin)
        } else if rest_is(i, "+{") {
            i += 2;
            Tok::PlusBrace
        } else if rest_is(i, "&{") {
            i += 2;
            Tok::AmpBrace
        } else if rest_is(i, "==") {
            i += 2;
            Tok::EqEq
        } else {
            i += c.len_utf8();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '!' => Tok::Bang,
                '?' => Tok::Quest,
                '@' => Tok::At,
                '\\' => Tok::Backslash,
                _ => return Err(err(format!("unexpected character `{}`", c), start)),
            }
        };
        out.push((tok, Span::new(start, i)));
    }
    out.push((Tok::Eof, Span::new(src.len(), src.len())));
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Typed,
    Untyped,
}

#[derive(Clone, Debug)]
struct Raw {
    kind: RawKind,
    span: Span,
}

#[derive(Clone, Debug)]
enum RawKind {
    Var(String),
    Unit,
    Int(i64),
    Lam(Option<Mult>, String, Option<Type>, Box<Raw>),
    App(Box<Raw>, Box<Raw>),
    Pair(Option<Mult>, Box<Raw>, Box<Raw>),
    LetPair(String, String, Box<Raw>, Box<Raw>),
    Let(String, Option<Type>, Box<Raw>, Box<Raw>),
    Seq(Box<Raw>, Box<Raw>),
    Fork(Box<Raw>),
    New(Option<Session>),
    Send(Box<Raw>, Box<Raw>),
    Receive(Box<Raw>),
    Select(String, Box<Raw>),
    Case(Box<Raw>, Vec<(String, String, Raw)>),
    Close(Box<Raw>),
    Wait(Box<Raw>),
    Arith(ArithOp, Vec<Raw>),
    If(Box<Raw>, Box<Raw>, Box<Raw>),
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
    mode: Mode,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str, mode: Mode) -> PResult<Self> {
        Ok(Parser { src, toks: lex(src)?, pos: 0, mode })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, span: Span, msg: impl Into<String>) -> ParseError {
        let (line, col) = line_col(self.src, span.start);
        ParseError { msg: msg.into(), line, col, span }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        self.error_at(self.span(), format!("expected {}, found {}", what, self.peek()))
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&t.to_string()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{}`", kw)))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn mult(&mut self) -> PResult<Mult> {
        match self.peek() {
            Tok::Ident(s) if s == "un" => {
                self.bump();
                Ok(Mult::Un)
            }
            Tok::Ident(s) if s == "lin" => {
                self.bump();
                Ok(Mult::Lin)
            }
            _ => Err(self.unexpected("`un` or `lin`")),
        }
    }

    // -- types ---------------------------------------------------------------

    fn ty(&mut self) -> PResult<Type> {
        let lhs = self.ty_prod()?;
        if let Tok::Arrow(m) = *self.peek() {
            self.bump();
            let rhs = self.ty()?;
            return Ok(Type::Fn(m, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn ty_prod(&mut self) -> PResult<Type> {
        let mut lhs = self.ty_atom()?;
        while let Tok::Star(m) = *self.peek() {
            self.bump();
            let rhs = self.ty_atom()?;
            lhs = Type::Prod(m, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ty_atom(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "Unit" => {
                self.bump();
                Ok(Type::Unit)
            }
            Tok::Ident(s) if s == "Int" => {
                self.bump();
                Ok(Type::Int)
            }
            Tok::Ident(s) if s == "Dyn" => {
                self.bump();
                Ok(Type::Dyn)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => Ok(Type::Sess(self.session()?)),
        }
    }

    fn session(&mut self) -> PResult<Session> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Bang | Tok::Quest => {
                let out = *self.peek() == Tok::Bang;
                self.bump();
                let t = self.ty_atom()?;
                self.expect(Tok::Dot)?;
                let s = self.session()?;
                Ok(if out {
                    Session::Send(Box::new(t), Box::new(s))
                } else {
                    Session::Recv(Box::new(t), Box::new(s))
                })
            }
            Tok::PlusBrace => {
                self.bump();
                Ok(Session::Select(self.branches(start)?))
            }
            Tok::AmpBrace => {
                self.bump();
                Ok(Session::Offer(self.branches(start)?))
            }
            Tok::EndOut => {
                self.bump();
                Ok(Session::EndOut)
            }
            Tok::EndIn => {
                self.bump();
                Ok(Session::EndIn)
            }
            Tok::Ident(s) if s == "DC" => {
                self.bump();
                Ok(Session::DC)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                match t {
                    Type::Sess(s) => Ok(s),
                    other => Err(self.error_at(start, format!("expected a session type, found `{}`", other))),
                }
            }
            _ => Err(self.unexpected("a type")),
        }
    }

    fn branches(&mut self, start: Span) -> PResult<Branches> {
        let mut bs = Branches::new();
        loop {
            if *self.peek() == Tok::RBrace {
                break;
            }
            let at = self.span();
            let l = self.ident()?;
            self.expect(Tok::Colon)?;
            let s = self.session()?;
            if bs.insert(l.clone(), s).is_some() {
                return Err(self.error_at(at, format!("duplicate label `{}`", l)));
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        if bs.is_empty() {
            return Err(self.error_at(start, "choice type needs at least one label"));
        }
        Ok(bs)
    }

    // -- expressions ---------------------------------------------------------

    fn mk(&self, kind: RawKind, start: usize) -> Raw {
        Raw { kind, span: Span::new(start, self.prev_end()) }
    }

    fn expr(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        let e = self.low()?;
        if *self.peek() == Tok::Semi {
            self.bump();
            let rest = self.expr()?;
            return Ok(self.mk(RawKind::Seq(Box::new(e), Box::new(rest)), start));
        }
        Ok(e)
    }

    fn low(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        let lam_mult = match self.peek() {
            Tok::Ident(s) if s == "lambda_un" => Some(Some(Mult::Un)),
            Tok::Ident(s) if s == "lambda_lin" => Some(Some(Mult::Lin)),
            Tok::Ident(s) if s == "lambda" => Some(None),
            Tok::Backslash => Some(None),
            _ => None,
        };
        if let Some(m) = lam_mult {
            self.bump();
            let x = self.ident()?;
            let ann = if *self.peek() == Tok::Colon {
                self.bump();
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(Tok::Dot)?;
            let body = self.expr()?;
            return Ok(self.mk(RawKind::Lam(m, x, ann, Box::new(body)), start));
        }
        if self.is_kw("let") {
            self.bump();
            let x = self.ident()?;
            if *self.peek() == Tok::Comma {
                self.bump();
                let y = self.ident()?;
                self.expect(Tok::Eq)?;
                let bound = self.expr()?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                return Ok(self.mk(RawKind::LetPair(x, y, Box::new(bound), Box::new(body)), start));
            }
            let ann = if *self.peek() == Tok::Colon {
                self.bump();
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(Tok::Eq)?;
            let bound = self.expr()?;
            self.expect_kw("in")?;
            let body = self.expr()?;
            return Ok(self.mk(RawKind::Let(x, ann, Box::new(bound), Box::new(body)), start));
        }
        if self.is_kw("if") {
            self.bump();
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(self.mk(RawKind::If(Box::new(c), Box::new(t), Box::new(e)), start));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        let lhs = self.add()?;
        if *self.peek() == Tok::EqEq {
            self.bump();
            let rhs = self.add()?;
            return Ok(self.mk(RawKind::Arith(ArithOp::Eq, vec![lhs, rhs]), start));
        }
        Ok(lhs)
    }

    fn add(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = self.mk(RawKind::Arith(op, vec![lhs, rhs]), start);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        if *self.peek() == Tok::Minus {
            let minus = self.span();
            self.bump();
            // `-7` with no space is a literal; `- e` is negation
            if let Tok::Int(n) = *self.peek() {
                if self.span().start == minus.end {
                    self.bump();
                    return Ok(self.mk(RawKind::Int(-n), start));
                }
            }
            let e = self.unary()?;
            return Ok(self.mk(RawKind::Arith(ArithOp::Neg, vec![e]), start));
        }
        self.app()
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => s == "case" || !KEYWORDS.contains(&s.as_str()),
            Tok::Int(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => String::new(),
        };
        match kw.as_str() {
            "fork" => {
                self.bump();
                let e = self.atom()?;
                return Ok(self.mk(RawKind::Fork(Box::new(e)), start));
            }
            "send" => {
                self.bump();
                let v = self.atom()?;
                let c = self.atom()?;
                return Ok(self.mk(RawKind::Send(Box::new(v), Box::new(c)), start));
            }
            "receive" => {
                self.bump();
                let c = self.atom()?;
                return Ok(self.mk(RawKind::Receive(Box::new(c)), start));
            }
            "select" => {
                self.bump();
                let l = self.ident()?;
                let c = self.atom()?;
                return Ok(self.mk(RawKind::Select(l, Box::new(c)), start));
            }
            "close" => {
                self.bump();
                let c = self.atom()?;
                return Ok(self.mk(RawKind::Close(Box::new(c)), start));
            }
            "wait" => {
                self.bump();
                let c = self.atom()?;
                return Ok(self.mk(RawKind::Wait(Box::new(c)), start));
            }
            "new" => {
                self.bump();
                let s = match self.mode {
                    Mode::Typed => Some(self.session()?),
                    Mode::Untyped => None,
                };
                return Ok(self.mk(RawKind::New(s), start));
            }
            _ => {}
        }
        let mut head = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            head = self.mk(RawKind::App(Box::new(head), Box::new(arg)), start);
        }
        Ok(head)
    }

    fn atom(&mut self) -> PResult<Raw> {
        let start = self.span().start;
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(self.mk(RawKind::Int(n), start))
            }
            Tok::Ident(s) if s == "case" => {
                self.bump();
                let scrut = self.expr()?;
                self.expect_kw("of")?;
                self.expect(Tok::LBrace)?;
                let mut bs = Vec::new();
                while *self.peek() != Tok::RBrace {
                    let l = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let x = self.ident()?;
                    self.expect(Tok::Dot)?;
                    let body = self.expr()?;
                    bs.push((l, x, body));
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(self.mk(RawKind::Case(Box::new(scrut), bs), start))
            }
            Tok::Ident(_) => {
                let x = self.ident()?;
                Ok(self.mk(RawKind::Var(x), start))
            }
            Tok::LParen => {
                self.bump();
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(self.mk(RawKind::Unit, start));
                }
                let e = self.expr()?;
                if *self.peek() == Tok::Comma {
                    self.bump();
                    let f = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let m = if *self.peek() == Tok::At {
                        self.bump();
                        Some(self.mult()?)
                    } else {
                        None
                    };
                    return Ok(self.mk(RawKind::Pair(m, Box::new(e), Box::new(f)), start));
                }
                self.expect(Tok::RParen)?;
                // keep the parenthesized span tight around the inner term
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn imports(&mut self) -> PResult<Vec<Import>> {
        let mut out = Vec::new();
        while self.is_kw("import") {
            let start = self.span().start;
            self.bump();
            self.expect_kw("untyped")?;
            let path = match self.bump() {
                Tok::Str(s) => s,
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("a file path string"));
                }
            };
            self.expect_kw("as")?;
            let name = self.ident()?;
            out.push(Import { path, name, span: Span::new(start, self.prev_end()) });
        }
        Ok(out)
    }

    fn finish(&mut self) -> PResult<()> {
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lowering.

fn lower_typed(p: &Parser, r: Raw) -> PResult<Expr> {
    let span = r.span;
    let b = |x: Raw| -> PResult<Box<Expr>> { Ok(Box::new(lower_typed(p, x)?)) };
    let kind = match r.kind {
        RawKind::Var(x) => ExprKind::Var(x),
        RawKind::Unit => ExprKind::Unit,
        RawKind::Int(n) => ExprKind::Int(n),
        RawKind::Lam(Some(m), x, Some(t), body) => ExprKind::Lam(m, x, t, b(*body)?),
        RawKind::Lam(..) => {
            return Err(p.error_at(span, "abstractions need a multiplicity and an annotation: `lambda_un x: T. e`"))
        }
        RawKind::App(f, a) => ExprKind::App(b(*f)?, b(*a)?),
        RawKind::Pair(Some(m), l, r) => ExprKind::Pair(m, b(*l)?, b(*r)?),
        RawKind::Pair(None, ..) => return Err(p.error_at(span, "pairs need a multiplicity: `(e1, e2)@un`")),
        RawKind::LetPair(x, y, e1, e2) => ExprKind::LetPair(x, y, b(*e1)?, b(*e2)?),
        RawKind::Let(x, Some(t), bound, body) => {
            let lam = Expr::new(ExprKind::Lam(Mult::Lin, x, t, b(*body)?), span);
            ExprKind::App(Box::new(lam), b(*bound)?)
        }
        RawKind::Let(_, None, ..) => return Err(p.error_at(span, "let needs an annotation: `let x : T = e1 in e2`")),
        RawKind::Seq(e1, e2) => {
            let lam = Expr::new(ExprKind::Lam(Mult::Lin, "_".into(), Type::Unit, b(*e2)?), span);
            ExprKind::App(Box::new(lam), b(*e1)?)
        }
        RawKind::Fork(e) => ExprKind::Fork(b(*e)?),
        RawKind::New(Some(s)) => ExprKind::New(s),
        RawKind::New(None) => return Err(p.error_at(span, "`new` needs a session type")),
        RawKind::Send(v, c) => ExprKind::Send(b(*v)?, b(*c)?),
        RawKind::Receive(c) => ExprKind::Receive(b(*c)?),
        RawKind::Select(l, c) => ExprKind::Select(l, b(*c)?),
        RawKind::Case(e, bs) => ExprKind::Case(b(*e)?, lower_branches(p, span, bs, lower_typed)?),
        RawKind::Close(c) => ExprKind::Close(b(*c)?),
        RawKind::Wait(c) => ExprKind::Wait(b(*c)?),
        RawKind::Arith(op, args) => {
            ExprKind::Arith(op, args.into_iter().map(|a| lower_typed(p, a)).collect::<PResult<_>>()?)
        }
        RawKind::If(c, t, e) => ExprKind::If(b(*c)?, b(*t)?, b(*e)?),
    };
    Ok(Expr::new(kind, span))
}

fn lower_untyped(p: &Parser, r: Raw) -> PResult<UExpr> {
    let span = r.span;
    let b = |x: Raw| -> PResult<Box<UExpr>> { Ok(Box::new(lower_untyped(p, x)?)) };
    let kind = match r.kind {
        RawKind::Var(x) => UExprKind::Var(x),
        RawKind::Unit => UExprKind::Unit,
        RawKind::Int(n) => UExprKind::Int(n),
        RawKind::Lam(m, x, None, body) if m != Some(Mult::Lin) => UExprKind::Lam(Mult::Un, x, b(*body)?),
        RawKind::Lam(..) => return Err(p.error_at(span, "untyped abstractions are written `lambda x. e`")),
        RawKind::App(f, a) => UExprKind::App(b(*f)?, b(*a)?),
        RawKind::Pair(None | Some(Mult::Un), l, r) => UExprKind::Pair(Mult::Un, b(*l)?, b(*r)?),
        RawKind::Pair(Some(Mult::Lin), ..) => return Err(p.error_at(span, "untyped pairs are unrestricted")),
        RawKind::LetPair(x, y, e1, e2) => UExprKind::LetPair(x, y, b(*e1)?, b(*e2)?),
        RawKind::Let(x, None, bound, body) => {
            let lam = UExpr::new(UExprKind::Lam(Mult::Un, x, b(*body)?), span);
            UExprKind::App(Box::new(lam), b(*bound)?)
        }
        RawKind::Let(_, Some(_), ..) => return Err(p.error_at(span, "untyped let takes no annotation")),
        RawKind::Seq(e1, e2) => {
            let lam = UExpr::new(UExprKind::Lam(Mult::Un, "_".into(), b(*e2)?), span);
            UExprKind::App(Box::new(lam), b(*e1)?)
        }
        RawKind::Fork(e) => UExprKind::Fork(b(*e)?),
        RawKind::New(_) => UExprKind::New,
        RawKind::Send(v, c) => UExprKind::Send(b(*v)?, b(*c)?),
        RawKind::Receive(c) => UExprKind::Receive(b(*c)?),
        RawKind::Select(l, c) => UExprKind::Select(l, b(*c)?),
        RawKind::Case(e, bs) => UExprKind::Case(b(*e)?, lower_branches(p, span, bs, lower_untyped)?),
        RawKind::Close(c) => UExprKind::Close(b(*c)?),
        RawKind::Wait(c) => UExprKind::Wait(b(*c)?),
        RawKind::Arith(op, args) => {
            UExprKind::Arith(op, args.into_iter().map(|a| lower_untyped(p, a)).collect::<PResult<_>>()?)
        }
        RawKind::If(c, t, e) => UExprKind::If(b(*c)?, b(*t)?, b(*e)?),
    };
    Ok(UExpr::new(kind, span))
}

fn lower_branches<E>(
    p: &Parser,
    span: Span,
    bs: Vec<(String, String, Raw)>,
    lower: fn(&Parser, Raw) -> PResult<E>,
) -> PResult<BTreeMap<String, (String, E)>> {
    if bs.is_empty() {
        return Err(p.error_at(span, "case needs at least one branch"));
    }
    let mut out = BTreeMap::new();
    for (l, x, body) in bs {
        let body_span = body.span;
        if out.insert(l.clone(), (x, lower(p, body)?)).is_some() {
            return Err(p.error_at(body_span, format!("duplicate case label `{}`", l)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Entry points.

pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(src, Mode::Typed)?;
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_session(src: &str) -> Result<Session, ParseError> {
    let mut p = Parser::new(src, Mode::Typed)?;
    let s = p.session()?;
    p.finish()?;
    Ok(s)
}

/// Parse a typed expression (no imports).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, Mode::Typed)?;
    let r = p.expr()?;
    p.finish()?;
    lower_typed(&p, r)
}

/// Parse a typed program: leading imports, then the body.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src, Mode::Typed)?;
    let imports = p.imports()?;
    let r = p.expr()?;
    p.finish()?;
    let body = lower_typed(&p, r)?;
    Ok(Program { imports, body })
}

pub fn parse_untyped(src: &str) -> Result<UExpr, ParseError> {
    let mut p = Parser::new(src, Mode::Untyped)?;
    let r = p.expr()?;
    p.finish()?;
    lower_untyped(&p, r)
}
