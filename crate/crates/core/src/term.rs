//! Terms of the internal cast calculus.
//!
//! Internal terms are the elaboration target: the external forms with
//! annotations kept on binders (the runtime needs them when it builds new
//! abstractions), plus casts, channel endpoints and cell references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::ArithOp;
use crate::blame::BlameLabel;
use crate::types::{is_ground, is_ground_session, is_un, Mult, Session, Type};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    /// Channel endpoint; endpoints `2k` and `2k+1` are the two ends of pair `k`.
    Chan(u32),
    /// Reference to a linearity cell.
    Ref(u32),
    Unit,
    Int(i64),
    Lam(Mult, String, Type, Box<Term>),
    App(Box<Term>, Box<Term>),
    Pair(Mult, Box<Term>, Box<Term>),
    LetPair(String, String, Box<Term>, Box<Term>),
    Fork(Box<Term>),
    New(Session),
    Send(Box<Term>, Box<Term>),
    Receive(Box<Term>),
    Select(String, Box<Term>),
    Case(Box<Term>, BTreeMap<String, (String, Term)>),
    Close(Box<Term>),
    Wait(Box<Term>),
    Arith(ArithOp, Vec<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Cast(Box<Term>, Type, Type, BlameLabel),
}

/// A free name an internal term can be charged with: a variable of linear
/// type or a channel endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Name {
    Var(String),
    Chan(u32),
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Var(x) => f.write_str(x),
            Name::Chan(c) => write!(f, "c{}", c),
        }
    }
}

/// The other end of a channel endpoint.
pub fn partner(c: u32) -> u32 {
    c ^ 1
}

pub fn cast(e: Term, from: Type, to: Type, p: BlameLabel) -> Term {
    Term::Cast(Box::new(e), from, to, p)
}

pub fn app(f: Term, a: Term) -> Term {
    Term::App(Box::new(f), Box::new(a))
}

impl Term {
    pub fn is_value(&self) -> bool {
        match self {
            Term::Unit | Term::Int(_) | Term::Lam(..) | Term::Chan(_) | Term::Ref(_) => true,
            Term::Pair(_, v, w) => v.is_value() && w.is_value(),
            Term::Cast(v, from, to, _) => v.is_value() && is_value_cast(from, to),
            _ => false,
        }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        match self {
            Term::Var(_) | Term::Chan(_) | Term::Ref(_) | Term::Unit | Term::Int(_) | Term::New(_) => {}
            Term::Lam(_, _, _, b)
            | Term::Fork(b)
            | Term::Receive(b)
            | Term::Select(_, b)
            | Term::Close(b)
            | Term::Wait(b)
            | Term::Cast(b, ..) => b.visit(f),
            Term::App(a, b) | Term::Pair(_, a, b) | Term::LetPair(_, _, a, b) | Term::Send(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Term::Case(e, bs) => {
                e.visit(f);
                for (_, b) in bs.values() {
                    b.visit(f);
                }
            }
            Term::Arith(_, args) => args.iter().for_each(|a| a.visit(f)),
            Term::If(c, t, e) => {
                c.visit(f);
                t.visit(f);
                e.visit(f);
            }
        }
    }

    /// Every cast in the term, outermost first.
    pub fn casts(&self) -> Vec<(&Type, &Type, BlameLabel)> {
        let mut out = Vec::new();
        collect_casts(self, &mut out);
        out
    }

    pub fn cast_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |t| {
            if matches!(t, Term::Cast(..)) {
                n += 1
            }
        });
        n
    }

    /// Channel endpoints occurring in the term (all of them are free:
    /// nothing binds an endpoint).
    pub fn channels(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Chan(c) = t {
                out.insert(*c);
            }
        });
        out
    }

    pub fn refs(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Ref(a) = t {
                out.insert(*a);
            }
        });
        out
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        free_vars(self, &mut Vec::new(), &mut out);
        out
    }
}

fn collect_casts<'a>(t: &'a Term, out: &mut Vec<(&'a Type, &'a Type, BlameLabel)>) {
    if let Term::Cast(_, from, to, p) = t {
        out.push((from, to, *p));
    }
    match t {
        Term::Var(_) | Term::Chan(_) | Term::Ref(_) | Term::Unit | Term::Int(_) | Term::New(_) => {}
        Term::Lam(_, _, _, b)
        | Term::Fork(b)
        | Term::Receive(b)
        | Term::Select(_, b)
        | Term::Close(b)
        | Term::Wait(b)
        | Term::Cast(b, ..) => collect_casts(b, out),
        Term::App(a, b) | Term::Pair(_, a, b) | Term::LetPair(_, _, a, b) | Term::Send(a, b) => {
            collect_casts(a, out);
            collect_casts(b, out);
        }
        Term::Case(e, bs) => {
            collect_casts(e, out);
            for (_, b) in bs.values() {
                collect_casts(b, out);
            }
        }
        Term::Arith(_, args) => args.iter().for_each(|a| collect_casts(a, out)),
        Term::If(c, th, el) => {
            collect_casts(c, out);
            collect_casts(th, out);
            collect_casts(el, out);
        }
    }
}

fn free_vars(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Term::Chan(_) | Term::Ref(_) | Term::Unit | Term::Int(_) | Term::New(_) => {}
        Term::Lam(_, x, _, b) => {
            bound.push(x.clone());
            free_vars(b, bound, out);
            bound.pop();
        }
        Term::LetPair(x, y, a, b) => {
            free_vars(a, bound, out);
            bound.push(x.clone());
            bound.push(y.clone());
            free_vars(b, bound, out);
            bound.truncate(bound.len() - 2);
        }
        Term::Case(e, bs) => {
            free_vars(e, bound, out);
            for (x, b) in bs.values() {
                bound.push(x.clone());
                free_vars(b, bound, out);
                bound.pop();
            }
        }
        Term::Fork(b) | Term::Receive(b) | Term::Select(_, b) | Term::Close(b) | Term::Wait(b) | Term::Cast(b, ..) => {
            free_vars(b, bound, out)
        }
        Term::App(a, b) | Term::Pair(_, a, b) | Term::Send(a, b) => {
            free_vars(a, bound, out);
            free_vars(b, bound, out);
        }
        Term::Arith(_, args) => args.iter().for_each(|a| free_vars(a, bound, out)),
        Term::If(c, th, el) => {
            free_vars(c, bound, out);
            free_vars(th, bound, out);
            free_vars(el, bound, out);
        }
    }
}

/// Casts whose application to a value is again a value.
pub fn is_value_cast(from: &Type, to: &Type) -> bool {
    match (from, to) {
        (g, Type::Dyn) => is_ground(g) && is_un(g),
        (Type::Fn(..), Type::Fn(..)) => true,
        (Type::Sess(s), Type::Sess(Session::DC)) => is_ground_session(s),
        (Type::Sess(s), Type::Sess(r)) => *s != Session::DC && *r != Session::DC,
        _ => false,
    }
}

/// Free linear names: the channel endpoints of the term.  References are
/// unrestricted and variables never occur free in runtime terms.
pub fn flv(t: &Term) -> BTreeSet<u32> {
    t.channels()
}

/// Substitute the closed value `v` for the free occurrences of `x`.
pub fn subst(t: &Term, x: &str, v: &Term) -> Term {
    let s = |e: &Term| Box::new(subst(e, x, v));
    match t {
        Term::Var(y) if y == x => v.clone(),
        Term::Var(_) | Term::Chan(_) | Term::Ref(_) | Term::Unit | Term::Int(_) | Term::New(_) => t.clone(),
        Term::Lam(m, y, ty, b) => {
            if y == x {
                t.clone()
            } else {
                Term::Lam(*m, y.clone(), ty.clone(), s(b))
            }
        }
        Term::App(a, b) => Term::App(s(a), s(b)),
        Term::Pair(m, a, b) => Term::Pair(*m, s(a), s(b)),
        Term::LetPair(y, z, a, b) => {
            let body = if y == x || z == x { b.clone() } else { s(b) };
            Term::LetPair(y.clone(), z.clone(), s(a), body)
        }
        Term::Fork(b) => Term::Fork(s(b)),
        Term::Send(a, b) => Term::Send(s(a), s(b)),
        Term::Receive(b) => Term::Receive(s(b)),
        Term::Select(l, b) => Term::Select(l.clone(), s(b)),
        Term::Case(e, bs) => Term::Case(
            s(e),
            bs.iter()
                .map(|(l, (y, b))| {
                    let b = if y == x { b.clone() } else { subst(b, x, v) };
                    (l.clone(), (y.clone(), b))
                })
                .collect(),
        ),
        Term::Close(b) => Term::Close(s(b)),
        Term::Wait(b) => Term::Wait(s(b)),
        Term::Arith(op, args) => Term::Arith(*op, args.iter().map(|a| subst(a, x, v)).collect()),
        Term::If(c, th, el) => Term::If(s(c), s(th), s(el)),
        Term::Cast(b, from, to, p) => Term::Cast(s(b), from.clone(), to.clone(), *p),
    }
}

/// Rewrite every cast label through `f`.
pub fn map_labels(t: &Term, f: &impl Fn(BlameLabel) -> BlameLabel) -> Term {
    let m = |e: &Term| Box::new(map_labels(e, f));
    match t {
        Term::Var(_) | Term::Chan(_) | Term::Ref(_) | Term::Unit | Term::Int(_) | Term::New(_) => t.clone(),
        Term::Lam(mu, x, ty, b) => Term::Lam(*mu, x.clone(), ty.clone(), m(b)),
        Term::App(a, b) => Term::App(m(a), m(b)),
        Term::Pair(mu, a, b) => Term::Pair(*mu, m(a), m(b)),
        Term::LetPair(x, y, a, b) => Term::LetPair(x.clone(), y.clone(), m(a), m(b)),
        Term::Fork(b) => Term::Fork(m(b)),
        Term::Send(a, b) => Term::Send(m(a), m(b)),
        Term::Receive(b) => Term::Receive(m(b)),
        Term::Select(l, b) => Term::Select(l.clone(), m(b)),
        Term::Case(e, bs) => Term::Case(
            m(e),
            bs.iter().map(|(l, (x, b))| (l.clone(), (x.clone(), map_labels(b, f)))).collect(),
        ),
        Term::Close(b) => Term::Close(m(b)),
        Term::Wait(b) => Term::Wait(m(b)),
        Term::Arith(op, args) => Term::Arith(*op, args.iter().map(|a| map_labels(a, f)).collect()),
        Term::If(c, th, el) => Term::If(m(c), m(th), m(el)),
        Term::Cast(b, from, to, p) => Term::Cast(m(b), from.clone(), to.clone(), f(*p)),
    }
}

/// Apply an old-to-new label id map produced by [`crate::blame::renumber`].
pub fn relabel(t: &Term, map: &BTreeMap<u32, u32>) -> Term {
    map_labels(t, &|p| BlameLabel { id: map.get(&p.id).copied().unwrap_or(p.id), neg: p.neg })
}

// ---------------------------------------------------------------------------
// Printing, in the notation of the calculus: binders without annotations,
// `let` for an abstraction applied directly, and cast chains flattened to
// `e : T1 => ℓ1 T2 => ℓ2 T3`.

const LOW: u8 = 0;
const CAST: u8 = 1;
const ARITH: u8 = 2;
const APP: u8 = 3;
const ATOM: u8 = 4;

fn prec(t: &Term) -> u8 {
    match t {
        Term::Lam(..) | Term::LetPair(..) | Term::If(..) => LOW,
        Term::App(f, _) if matches!(**f, Term::Lam(..)) => LOW,
        Term::Cast(..) => CAST,
        Term::Arith(..) => ARITH,
        Term::Int(n) if *n < 0 => ARITH,
        Term::App(..)
        | Term::Fork(_)
        | Term::New(_)
        | Term::Send(..)
        | Term::Receive(_)
        | Term::Select(..)
        | Term::Close(_)
        | Term::Wait(_) => APP,
        _ => ATOM,
    }
}

struct At<'a>(&'a Term, u8);

impl fmt::Display for At<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if prec(self.0) < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => f.write_str(x),
            Term::Chan(c) => write!(f, "c{}", c),
            Term::Ref(a) => write!(f, "a{}", a),
            Term::Unit => f.write_str("()"),
            Term::Int(n) => write!(f, "{}", n),
            Term::Lam(m, x, _, b) => write!(f, "lambda_{} {}. {}", m, x, b),
            Term::App(l, a) => match &**l {
                Term::Lam(_, x, _, body) => write!(f, "let {} = {} in {}", x, a, body),
                _ => write!(f, "{} {}", At(l, APP), At(a, ATOM)),
            },
            Term::Pair(m, a, b) => write!(f, "({}, {})@{}", a, b, m),
            Term::LetPair(x, y, a, b) => write!(f, "let {}, {} = {} in {}", x, y, a, b),
            Term::Fork(e) => write!(f, "fork {}", At(e, ATOM)),
            Term::New(_) => f.write_str("new"),
            Term::Send(a, b) => write!(f, "send {} {}", At(a, ATOM), At(b, ATOM)),
            Term::Receive(e) => write!(f, "receive {}", At(e, ATOM)),
            Term::Select(l, e) => write!(f, "select {} {}", l, At(e, ATOM)),
            Term::Case(e, bs) => {
                write!(f, "case {} of {{", e)?;
                for (i, (l, (x, b))) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {}. {}", l, x, b)?;
                }
                f.write_str("}")
            }
            Term::Close(e) => write!(f, "close {}", At(e, ATOM)),
            Term::Wait(e) => write!(f, "wait {}", At(e, ATOM)),
            Term::Arith(ArithOp::Neg, args) => write!(f, "- {}", At(&args[0], ATOM)),
            Term::Arith(op, args) => write!(f, "{} {} {}", At(&args[0], APP), op.symbol(), At(&args[1], APP)),
            Term::If(c, t, e) => write!(f, "if {} then {} else {}", c, t, e),
            Term::Cast(..) => fmt_cast_chain(self, f),
        }
    }
}

fn fmt_cast_chain(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Cast(body, from, to, p) => {
            match &**body {
                Term::Cast(_, _, inner_to, _) if inner_to == from => fmt_cast_chain(body, f)?,
                _ => write!(f, "{} : {}", At(body, APP), from)?,
            }
            write!(f, " => {} {}", p, to)
        }
        _ => unreachable!(),
    }
}
