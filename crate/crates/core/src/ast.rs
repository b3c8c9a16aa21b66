//! Surface syntax trees: the annotated external language and the
//! annotation-free language used both for untyped source files and for the
//! erasure of typed programs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{Mult, Session, Type};

/// Byte range in a source file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in src.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Neg,
    Eq,
}

impl ArithOp {
    pub fn arity(self) -> usize {
        match self {
            ArithOp::Neg => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub | ArithOp::Neg => "-",
            ArithOp::Eq => "==",
        }
    }

    pub fn eval(self, args: &[i64]) -> i64 {
        match (self, args) {
            (ArithOp::Add, [a, b]) => a.wrapping_add(*b),
            (ArithOp::Sub, [a, b]) => a.wrapping_sub(*b),
            (ArithOp::Neg, [a]) => a.wrapping_neg(),
            (ArithOp::Eq, [a, b]) => i64::from(a == b),
            _ => panic!("arity mismatch for {:?}", self),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Var(String),
    Unit,
    Int(i64),
    Lam(Mult, String, Type, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Pair(Mult, Box<Expr>, Box<Expr>),
    LetPair(String, String, Box<Expr>, Box<Expr>),
    Fork(Box<Expr>),
    New(Session),
    Send(Box<Expr>, Box<Expr>),
    Receive(Box<Expr>),
    Select(String, Box<Expr>),
    Case(Box<Expr>, BTreeMap<String, (String, Expr)>),
    Close(Box<Expr>),
    Wait(Box<Expr>),
    Arith(ArithOp, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// An expression with a dummy span, for programmatic construction.
    pub fn bare(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        1 + match &self.kind {
            ExprKind::Var(_) | ExprKind::Unit | ExprKind::Int(_) | ExprKind::New(_) => 0,
            ExprKind::Lam(_, _, _, b)
            | ExprKind::Fork(b)
            | ExprKind::Receive(b)
            | ExprKind::Select(_, b)
            | ExprKind::Close(b)
            | ExprKind::Wait(b) => b.size(),
            ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::LetPair(_, _, a, b) | ExprKind::Send(a, b) => {
                a.size() + b.size()
            }
            ExprKind::Case(e, bs) => e.size() + bs.values().map(|(_, b)| b.size()).sum::<usize>(),
            ExprKind::Arith(_, args) => args.iter().map(Expr::size).sum(),
            ExprKind::If(c, t, e) => c.size() + t.size() + e.size(),
        }
    }

    /// True if no annotation mentions `Dyn` or `DC`.
    pub fn is_static(&self) -> bool {
        match &self.kind {
            ExprKind::Var(_) | ExprKind::Unit | ExprKind::Int(_) => true,
            ExprKind::New(s) => s.is_static(),
            ExprKind::Lam(_, _, t, b) => t.is_static() && b.is_static(),
            ExprKind::Fork(b)
            | ExprKind::Receive(b)
            | ExprKind::Select(_, b)
            | ExprKind::Close(b)
            | ExprKind::Wait(b) => b.is_static(),
            ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::LetPair(_, _, a, b) | ExprKind::Send(a, b) => {
                a.is_static() && b.is_static()
            }
            ExprKind::Case(e, bs) => e.is_static() && bs.values().all(|(_, b)| b.is_static()),
            ExprKind::Arith(_, args) => args.iter().all(Expr::is_static),
            ExprKind::If(c, t, e) => c.is_static() && t.is_static() && e.is_static(),
        }
    }
}

/// `import untyped "path" as name`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Import {
    pub path: String,
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub imports: Vec<Import>,
    pub body: Expr,
}

/// Expressions without type annotations.  Untyped source only produces
/// `un` multiplicities; erasure keeps whatever the typed source said.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UExpr {
    pub kind: UExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UExprKind {
    Var(String),
    Unit,
    Int(i64),
    Lam(Mult, String, Box<UExpr>),
    App(Box<UExpr>, Box<UExpr>),
    Pair(Mult, Box<UExpr>, Box<UExpr>),
    LetPair(String, String, Box<UExpr>, Box<UExpr>),
    Fork(Box<UExpr>),
    New,
    Send(Box<UExpr>, Box<UExpr>),
    Receive(Box<UExpr>),
    Select(String, Box<UExpr>),
    Case(Box<UExpr>, BTreeMap<String, (String, UExpr)>),
    Close(Box<UExpr>),
    Wait(Box<UExpr>),
    Arith(ArithOp, Vec<UExpr>),
    If(Box<UExpr>, Box<UExpr>, Box<UExpr>),
}

impl UExpr {
    pub fn new(kind: UExprKind, span: Span) -> Self {
        UExpr { kind, span }
    }

    pub fn bare(kind: UExprKind) -> Self {
        UExpr { kind, span: Span::default() }
    }

    pub fn size(&self) -> usize {
        1 + match &self.kind {
            UExprKind::Var(_) | UExprKind::Unit | UExprKind::Int(_) | UExprKind::New => 0,
            UExprKind::Lam(_, _, b)
            | UExprKind::Fork(b)
            | UExprKind::Receive(b)
            | UExprKind::Select(_, b)
            | UExprKind::Close(b)
            | UExprKind::Wait(b) => b.size(),
            UExprKind::App(a, b)
            | UExprKind::Pair(_, a, b)
            | UExprKind::LetPair(_, _, a, b)
            | UExprKind::Send(a, b) => a.size() + b.size(),
            UExprKind::Case(e, bs) => e.size() + bs.values().map(|(_, b)| b.size()).sum::<usize>(),
            UExprKind::Arith(_, args) => args.iter().map(UExpr::size).sum(),
            UExprKind::If(c, t, e) => c.size() + t.size() + e.size(),
        }
    }
}

/// Type erasure: drop the annotations on abstractions and `new`.
pub fn erase(e: &Expr) -> UExpr {
    let b = |x: &Expr| Box::new(erase(x));
    let kind = match &e.kind {
        ExprKind::Var(x) => UExprKind::Var(x.clone()),
        ExprKind::Unit => UExprKind::Unit,
        ExprKind::Int(n) => UExprKind::Int(*n),
        ExprKind::Lam(m, x, _, body) => UExprKind::Lam(*m, x.clone(), b(body)),
        ExprKind::App(f, a) => UExprKind::App(b(f), b(a)),
        ExprKind::Pair(m, l, r) => UExprKind::Pair(*m, b(l), b(r)),
        ExprKind::LetPair(x, y, e1, e2) => UExprKind::LetPair(x.clone(), y.clone(), b(e1), b(e2)),
        ExprKind::Fork(x) => UExprKind::Fork(b(x)),
        ExprKind::New(_) => UExprKind::New,
        ExprKind::Send(v, c) => UExprKind::Send(b(v), b(c)),
        ExprKind::Receive(c) => UExprKind::Receive(b(c)),
        ExprKind::Select(l, c) => UExprKind::Select(l.clone(), b(c)),
        ExprKind::Case(s, bs) => UExprKind::Case(
            b(s),
            bs.iter().map(|(l, (x, body))| (l.clone(), (x.clone(), erase(body)))).collect(),
        ),
        ExprKind::Close(c) => UExprKind::Close(b(c)),
        ExprKind::Wait(c) => UExprKind::Wait(b(c)),
        ExprKind::Arith(op, args) => UExprKind::Arith(*op, args.iter().map(erase).collect()),
        ExprKind::If(c, t, f) => UExprKind::If(b(c), b(t), b(f)),
    };
    UExpr::new(kind, e.span)
}

// ---------------------------------------------------------------------------
// Printing.  Output re-parses: typed expressions in the typed grammar,
// unannotated ones in the untyped grammar (lin multiplicities print as
// `lambda_lin x.` / `@lin`, which only the erasure produces).

// Negative literals are parenthesized so they never read as subtraction.
fn fmt_int(f: &mut fmt::Formatter<'_>, n: i64) -> fmt::Result {
    if n < 0 {
        write!(f, "({})", n)
    } else {
        write!(f, "{}", n)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Var(x) => f.write_str(x),
            ExprKind::Unit => f.write_str("()"),
            ExprKind::Int(n) => fmt_int(f, *n),
            ExprKind::Lam(m, x, t, b) => write!(f, "(lambda_{} {}: {}. {})", m, x, t, b),
            ExprKind::App(a, b) => write!(f, "({} {})", a, b),
            ExprKind::Pair(m, a, b) => write!(f, "({}, {})@{}", a, b, m),
            ExprKind::LetPair(x, y, a, b) => write!(f, "(let {}, {} = {} in {})", x, y, a, b),
            ExprKind::Fork(e) => write!(f, "(fork {})", e),
            ExprKind::New(s) => write!(f, "(new {})", s),
            ExprKind::Send(a, b) => write!(f, "(send {} {})", a, b),
            ExprKind::Receive(e) => write!(f, "(receive {})", e),
            ExprKind::Select(l, e) => write!(f, "(select {} {})", l, e),
            ExprKind::Case(e, bs) => {
                write!(f, "case {} of {{", e)?;
                for (i, (l, (x, b))) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {}. {}", l, x, b)?;
                }
                f.write_str("}")
            }
            ExprKind::Close(e) => write!(f, "(close {})", e),
            ExprKind::Wait(e) => write!(f, "(wait {})", e),
            ExprKind::Arith(ArithOp::Neg, args) => write!(f, "(- {})", args[0]),
            ExprKind::Arith(op, args) => write!(f, "({} {} {})", args[0], op.symbol(), args[1]),
            ExprKind::If(c, t, e) => write!(f, "(if {} then {} else {})", c, t, e),
        }
    }
}

impl fmt::Display for UExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            UExprKind::Var(x) => f.write_str(x),
            UExprKind::Unit => f.write_str("()"),
            UExprKind::Int(n) => fmt_int(f, *n),
            UExprKind::Lam(Mult::Un, x, b) => write!(f, "(lambda {}. {})", x, b),
            UExprKind::Lam(Mult::Lin, x, b) => write!(f, "(lambda_lin {}. {})", x, b),
            UExprKind::App(a, b) => write!(f, "({} {})", a, b),
            UExprKind::Pair(Mult::Un, a, b) => write!(f, "({}, {})", a, b),
            UExprKind::Pair(Mult::Lin, a, b) => write!(f, "({}, {})@lin", a, b),
            UExprKind::LetPair(x, y, a, b) => write!(f, "(let {}, {} = {} in {})", x, y, a, b),
            UExprKind::Fork(e) => write!(f, "(fork {})", e),
            UExprKind::New => f.write_str("new"),
            UExprKind::Send(a, b) => write!(f, "(send {} {})", a, b),
            UExprKind::Receive(e) => write!(f, "(receive {})", e),
            UExprKind::Select(l, e) => write!(f, "(select {} {})", l, e),
            UExprKind::Case(e, bs) => {
                write!(f, "case {} of {{", e)?;
                for (i, (l, (x, b))) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {}. {}", l, x, b)?;
                }
                f.write_str("}")
            }
            UExprKind::Close(e) => write!(f, "(close {})", e),
            UExprKind::Wait(e) => write!(f, "(wait {})", e),
            UExprKind::Arith(ArithOp::Neg, args) => write!(f, "(- {})", args[0]),
            UExprKind::Arith(op, args) => write!(f, "({} {} {})", args[0], op.symbol(), args[1]),
            UExprKind::If(c, t, e) => write!(f, "(if {} then {} else {})", c, t, e),
        }
    }
}
