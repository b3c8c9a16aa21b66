//! Embedding of the unityped language into the cast calculus.
//!
//! Every untyped expression becomes an internal term of type `Dyn`; each
//! elimination form casts its subject down to the ground shape it needs and
//! every introduction form casts its result back up to `Dyn`.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Span, UExpr, UExprKind};
use crate::blame::{renumber, LabelAllocator, LabelInfo};
use crate::check::{tc_internal, CheckError};
use crate::term::{app, relabel, Term};
use crate::types::{fun, prod, Mult, Session, Type};

/// Result of embedding an untyped expression.
#[derive(Clone, Debug)]
pub struct Embedded {
    pub term: Term,
    pub labels: Vec<LabelInfo>,
}

struct Embedder {
    labels: LabelAllocator,
    infos: Vec<LabelInfo>,
    file: String,
}

fn dyn_fn(m: Mult) -> Type {
    fun(m, Type::Dyn, Type::Dyn)
}

fn sess(s: Session) -> Type {
    Type::Sess(s)
}

impl Embedder {
    fn cast(&mut self, e: Term, from: Type, to: Type, span: Span) -> Term {
        let p = self.labels.fresh();
        self.infos.push(LabelInfo { label: p, file: self.file.clone(), span, from: from.clone(), to: to.clone() });
        Term::Cast(Box::new(e), from, to, p)
    }

    fn down(&mut self, e: &UExpr, to: Type) -> Term {
        let t = self.embed(e);
        self.cast(t, Type::Dyn, to, e.span)
    }

    fn embed(&mut self, e: &UExpr) -> Term {
        let span = e.span;
        match &e.kind {
            UExprKind::Var(x) => Term::Var(x.clone()),
            UExprKind::Unit => self.cast(Term::Unit, Type::Unit, Type::Dyn, span),
            UExprKind::Int(n) => self.cast(Term::Int(*n), Type::Int, Type::Dyn, span),
            UExprKind::Lam(_, x, body) => {
                let b = self.embed(body);
                let lam = Term::Lam(Mult::Un, x.clone(), Type::Dyn, Box::new(b));
                self.cast(lam, dyn_fn(Mult::Un), Type::Dyn, span)
            }
            UExprKind::Pair(_, l, r) => {
                let (l, r) = (self.embed(l), self.embed(r));
                let pair = Term::Pair(Mult::Un, Box::new(l), Box::new(r));
                self.cast(pair, prod(Mult::Un, Type::Dyn, Type::Dyn), Type::Dyn, span)
            }
            UExprKind::App(f, a) => {
                let f = self.down(f, dyn_fn(Mult::Lin));
                let a = self.embed(a);
                app(f, a)
            }
            UExprKind::LetPair(x, y, bound, body) => {
                let bound = self.down(bound, prod(Mult::Lin, Type::Dyn, Type::Dyn));
                let body = self.embed(body);
                Term::LetPair(x.clone(), y.clone(), Box::new(bound), Box::new(body))
            }
            UExprKind::Fork(body) => {
                let b = self.down(body, Type::Unit);
                self.cast(Term::Fork(Box::new(b)), Type::Unit, Type::Dyn, span)
            }
            UExprKind::New => self.cast(
                Term::New(Session::DC),
                prod(Mult::Lin, Type::dc(), Type::dc()),
                Type::Dyn,
                span,
            ),
            UExprKind::Send(v, c) => {
                let v = self.embed(v);
                let c = self.down(c, sess(Session::Send(Box::new(Type::Dyn), Box::new(Session::DC))));
                self.cast(Term::Send(Box::new(v), Box::new(c)), Type::dc(), Type::Dyn, span)
            }
            UExprKind::Receive(c) => {
                let c = self.down(c, sess(Session::Recv(Box::new(Type::Dyn), Box::new(Session::DC))));
                self.cast(Term::Receive(Box::new(c)), prod(Mult::Lin, Type::Dyn, Type::dc()), Type::Dyn, span)
            }
            UExprKind::Select(l, c) => {
                let c = self.down(c, sess(Session::Select(BTreeMap::from([(l.clone(), Session::DC)]))));
                self.cast(Term::Select(l.clone(), Box::new(c)), Type::dc(), Type::Dyn, span)
            }
            UExprKind::Case(scrut, branches) => {
                let offer = branches.keys().map(|l| (l.clone(), Session::DC)).collect();
                let s = self.down(scrut, sess(Session::Offer(offer)));
                let mut out = BTreeMap::new();
                for (l, (x, body)) in branches {
                    // `%` cannot occur in source identifiers, so the binder is fresh
                    let y = format!("%{}", x);
                    let b = self.embed(body);
                    let up = self.cast(Term::Var(y.clone()), Type::dc(), Type::Dyn, body.span);
                    let arm = app(Term::Lam(Mult::Un, x.clone(), Type::Dyn, Box::new(b)), up);
                    out.insert(l.clone(), (y, arm));
                }
                Term::Case(Box::new(s), out)
            }
            UExprKind::Close(c) => {
                let c = self.down(c, Type::end_out());
                self.cast(Term::Close(Box::new(c)), Type::Unit, Type::Dyn, span)
            }
            UExprKind::Wait(c) => {
                let c = self.down(c, Type::end_in());
                self.cast(Term::Wait(Box::new(c)), Type::Unit, Type::Dyn, span)
            }
            UExprKind::Arith(op, args) => {
                let args = args.iter().map(|a| self.down(a, Type::Int)).collect();
                self.cast(Term::Arith(*op, args), Type::Int, Type::Dyn, span)
            }
            UExprKind::If(c, t, f) => {
                let c = self.down(c, Type::Int);
                let (t, f) = (self.embed(t), self.embed(f));
                Term::If(Box::new(c), Box::new(t), Box::new(f))
            }
        }
    }
}

/// Embed `e`, numbering labels from `first_label` in source order.
pub fn embed(e: &UExpr, first_label: u32, file: &str) -> Embedded {
    let mut em = Embedder { labels: LabelAllocator::starting_at(first_label), infos: Vec::new(), file: file.to_string() };
    let term = em.embed(e);
    let mut labels = em.infos;
    let map = renumber(&mut labels, first_label);
    Embedded { term: relabel(&term, &map), labels }
}

/// Free variables of an untyped expression.
pub fn free_vars(e: &UExpr) -> BTreeSet<String> {
    fn go(e: &UExpr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let under = |xs: &[&String], body: &UExpr, bound: &mut Vec<String>, out: &mut BTreeSet<String>| {
            let n = bound.len();
            bound.extend(xs.iter().map(|x| (*x).clone()));
            go(body, bound, out);
            bound.truncate(n);
        };
        match &e.kind {
            UExprKind::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            UExprKind::Unit | UExprKind::Int(_) | UExprKind::New => {}
            UExprKind::Lam(_, x, b) => under(&[x], b, bound, out),
            UExprKind::LetPair(x, y, a, b) => {
                go(a, bound, out);
                under(&[x, y], b, bound, out);
            }
            UExprKind::Case(s, bs) => {
                go(s, bound, out);
                for (x, b) in bs.values() {
                    under(&[x], b, bound, out);
                }
            }
            UExprKind::App(a, b) | UExprKind::Pair(_, a, b) | UExprKind::Send(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            UExprKind::Fork(a)
            | UExprKind::Receive(a)
            | UExprKind::Select(_, a)
            | UExprKind::Close(a)
            | UExprKind::Wait(a) => go(a, bound, out),
            UExprKind::Arith(_, args) => args.iter().for_each(|a| go(a, bound, out)),
            UExprKind::If(c, t, f) => {
                go(c, bound, out);
                go(t, bound, out);
                go(f, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// Check that the embedding of `e` is well typed at `Dyn`, with its free
/// variables assumed to be `Dyn`.
pub fn check_embedding(e: &UExpr) -> Result<(), CheckError> {
    let env = free_vars(e).into_iter().map(|x| (x, Type::Dyn)).collect();
    let (t, _) = tc_internal(&env, &embed(e, 1, "").term)?;
    if t != Type::Dyn {
        return Err(CheckError::Shape { expected: "Dyn".into(), found: t });
    }
    Ok(())
}
