//! Algorithmic typechecking of the external language, with cast insertion
//! done in the same traversal.
//!
//! [`tcexp`] returns a type and the set of linear variables the expression
//! uses; every failed assertion of the algorithm has its own error kind.
//! [`elaborate`] runs the same checker and additionally builds the internal
//! term, inserting a labelled cast wherever a consistent-subtyping step is
//! not already a subtyping step.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::{Expr, ExprKind, Span};
use crate::blame::{renumber, BlameLabel, LabelAllocator, LabelInfo};
use crate::relations::{
    consistent, consistent_sub, join, match_case, match_fun, match_prod, match_recv, match_select, match_send,
    sub,
};
use crate::term::{cast, relabel, Term};
use crate::types::{dual, fun, is_lin, is_un, prod, Mult, Session, Type};

pub type TypeEnv = BTreeMap<String, Type>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeErrorKind {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("linear variable {0} is never used")]
    LinearUnused(String),
    #[error("linear variable {0} used twice")]
    LinearTwice(String),
    #[error("linear variable {0} escapes an unrestricted abstraction")]
    EscapesUn(String),
    #[error("unrestricted pair has a component of linear type {0}")]
    LinearInUnPair(Type),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: Type },
    #[error("inconsistent argument: {found} is not a consistent subtype of {expected}")]
    Inconsistent { found: Type, expected: Type },
    #[error("branch-set mismatch: branches use linear variables {{{left}}} and {{{right}}}")]
    BranchSets { left: String, right: String },
    #[error("join failure: {0} and {1} have no join")]
    NoJoin(Type, Type),
    #[error("result type {0} is linear")]
    LinearResult(Type),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: Span,
}

fn err<T>(kind: TypeErrorKind, span: Span) -> Result<T, TypeError> {
    Err(TypeError { kind, span })
}

fn names(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(", ")
}

type Lin = BTreeSet<String>;

/// Result of elaborating a program.
#[derive(Clone, Debug)]
pub struct Elaborated {
    pub term: Term,
    pub ty: Type,
    pub labels: Vec<LabelInfo>,
}

struct Checker {
    labels: LabelAllocator,
    infos: Vec<LabelInfo>,
    file: String,
}

impl Checker {
    fn new(file: &str) -> Self {
        Checker { labels: LabelAllocator::new(), infos: Vec::new(), file: file.to_string() }
    }

    /// The `⇒?` cast: nothing when `from ≤ to`, else a fresh label.
    fn smart_cast(&mut self, e: Term, from: &Type, to: &Type, span: Span) -> Term {
        if sub(from, to) {
            return e;
        }
        debug_assert!(consistent_sub(from, to), "cast {} => {} is inconsistent", from, to);
        let p = self.labels.fresh();
        self.infos.push(LabelInfo { label: p, file: self.file.clone(), span, from: from.clone(), to: to.clone() });
        cast(e, from.clone(), to.clone(), p)
    }

    fn disjoint(&self, x: &Lin, y: &Lin, span: Span) -> Result<(), TypeError> {
        match x.intersection(y).next() {
            Some(z) => err(TypeErrorKind::LinearTwice(z.clone()), span),
            None => Ok(()),
        }
    }

    fn check_csub(&self, found: &Type, expected: &Type, span: Span) -> Result<(), TypeError> {
        if consistent_sub(found, expected) {
            Ok(())
        } else {
            err(TypeErrorKind::Inconsistent { found: found.clone(), expected: expected.clone() }, span)
        }
    }

    fn check_cons(&self, found: &Type, expected: &Type, span: Span) -> Result<(), TypeError> {
        if consistent(found, expected) {
            Ok(())
        } else {
            err(TypeErrorKind::Inconsistent { found: found.clone(), expected: expected.clone() }, span)
        }
    }

    fn infer(&mut self, env: &mut Vec<(String, Type)>, e: &Expr) -> Result<(Type, Lin, Term), TypeError> {
        let span = e.span;
        let shape = |expected: &str, found: &Type| {
            err(TypeErrorKind::Shape { expected: expected.to_string(), found: found.clone() }, span)
        };
        match &e.kind {
            ExprKind::Var(z) => {
                let t = match env.iter().rev().find(|(x, _)| x == z) {
                    Some((_, t)) => t.clone(),
                    None => return err(TypeErrorKind::Unbound(z.clone()), span),
                };
                let lin = if is_lin(&t) { Lin::from([z.clone()]) } else { Lin::new() };
                Ok((t, lin, Term::Var(z.clone())))
            }
            ExprKind::Unit => Ok((Type::Unit, Lin::new(), Term::Unit)),
            ExprKind::Int(n) => Ok((Type::Int, Lin::new(), Term::Int(*n))),
            ExprKind::Lam(m, x, t1, body) => {
                env.push((x.clone(), t1.clone()));
                let res = self.infer(env, body);
                env.pop();
                let (t2, mut y, f) = res?;
                let term = Term::Lam(*m, x.clone(), t1.clone(), Box::new(f));
                let out = match (is_lin(t1), m) {
                    (true, Mult::Un) => {
                        if !y.contains(x) {
                            return err(TypeErrorKind::LinearUnused(x.clone()), span);
                        }
                        if let Some(z) = y.iter().find(|z| *z != x) {
                            return err(TypeErrorKind::EscapesUn(z.clone()), span);
                        }
                        (fun(Mult::Un, t1.clone(), t2), Lin::new())
                    }
                    (true, Mult::Lin) => {
                        if !y.remove(x) {
                            return err(TypeErrorKind::LinearUnused(x.clone()), span);
                        }
                        (fun(Mult::Lin, t1.clone(), t2), y)
                    }
                    (false, Mult::Un) => {
                        if let Some(z) = y.iter().next() {
                            return err(TypeErrorKind::EscapesUn(z.clone()), span);
                        }
                        (fun(Mult::Un, t1.clone(), t2), Lin::new())
                    }
                    (false, Mult::Lin) => (fun(Mult::Lin, t1.clone(), t2), y),
                };
                Ok((out.0, out.1, term))
            }
            ExprKind::App(e1, e2) => {
                let (t1, x, f1) = self.infer(env, e1)?;
                let (t2, y, f2) = self.infer(env, e2)?;
                self.disjoint(&x, &y, span)?;
                let Some((m, t11, t12)) = match_fun(&t1) else { return shape("a function type", &t1) };
                self.check_csub(&t2, &t11, e2.span)?;
                let arrow = fun(m, t11.clone(), t12.clone());
                let f1 = self.smart_cast(f1, &t1, &arrow, e1.span);
                let f2 = self.smart_cast(f2, &t2, &t11, e2.span);
                Ok((t12, &x | &y, crate::term::app(f1, f2)))
            }
            ExprKind::Pair(m, e1, e2) => {
                let (t1, x, f1) = self.infer(env, e1)?;
                let (t2, y, f2) = self.infer(env, e2)?;
                self.disjoint(&x, &y, span)?;
                if *m == Mult::Un {
                    for t in [&t1, &t2] {
                        if !is_un(t) {
                            return err(TypeErrorKind::LinearInUnPair(t.clone()), span);
                        }
                    }
                }
                Ok((prod(*m, t1, t2), &x | &y, Term::Pair(*m, Box::new(f1), Box::new(f2))))
            }
            ExprKind::LetPair(x1, x2, e1, e2) => {
                let (t, y, f1) = self.infer(env, e1)?;
                let Some((m, t1, t2)) = match_prod(&t) else { return shape("a product type", &t) };
                env.push((x1.clone(), t1.clone()));
                env.push((x2.clone(), t2.clone()));
                let res = self.infer(env, e2);
                env.truncate(env.len() - 2);
                let (u, mut z, f2) = res?;
                // the later binder shadows the earlier one when both names agree
                if is_lin(&t1) && x1 != x2 && !z.remove(x1) {
                    return err(TypeErrorKind::LinearUnused(x1.clone()), span);
                }
                if is_lin(&t2) && !z.remove(x2) {
                    return err(TypeErrorKind::LinearUnused(x2.clone()), span);
                }
                self.disjoint(&y, &z, span)?;
                let f1 = self.smart_cast(f1, &t, &prod(m, t1, t2), e1.span);
                Ok((u, &y | &z, Term::LetPair(x1.clone(), x2.clone(), Box::new(f1), Box::new(f2))))
            }
            ExprKind::Fork(e1) => {
                let (t, x, f) = self.infer(env, e1)?;
                self.check_cons(&t, &Type::Unit, e1.span)?;
                let f = self.smart_cast(f, &t, &Type::Unit, e1.span);
                Ok((Type::Unit, x, Term::Fork(Box::new(f))))
            }
            ExprKind::New(s) => {
                Ok((prod(Mult::Lin, Type::Sess(s.clone()), Type::Sess(dual(s))), Lin::new(), Term::New(s.clone())))
            }
            ExprKind::Send(e1, e2) => {
                let (t1, x, f1) = self.infer(env, e1)?;
                let (t2, y, f2) = self.infer(env, e2)?;
                self.disjoint(&x, &y, span)?;
                let Some((t3, s)) = match_send(&t2) else { return shape("a send type", &t2) };
                self.check_csub(&t1, &t3, e1.span)?;
                let f1 = self.smart_cast(f1, &t1, &t3, e1.span);
                let matched = Type::Sess(Session::Send(Box::new(t3), Box::new(s.clone())));
                let f2 = self.smart_cast(f2, &t2, &matched, e2.span);
                Ok((Type::Sess(s), &x | &y, Term::Send(Box::new(f1), Box::new(f2))))
            }
            ExprKind::Receive(e1) => {
                let (t1, x, f) = self.infer(env, e1)?;
                let Some((t2, s)) = match_recv(&t1) else { return shape("a receive type", &t1) };
                let matched = Type::Sess(Session::Recv(Box::new(t2.clone()), Box::new(s.clone())));
                let f = self.smart_cast(f, &t1, &matched, e1.span);
                Ok((prod(Mult::Lin, t2, Type::Sess(s)), x, Term::Receive(Box::new(f))))
            }
            ExprKind::Select(l, e1) => {
                let (t, x, f) = self.infer(env, e1)?;
                let Some(sj) = match_select(&t, l) else {
                    return shape(&format!("a selection offering {}", l), &t);
                };
                let matched = Type::Sess(Session::Select(BTreeMap::from([(l.clone(), sj.clone())])));
                let f = self.smart_cast(f, &t, &matched, e1.span);
                Ok((Type::Sess(sj), x, Term::Select(l.clone(), Box::new(f))))
            }
            ExprKind::Case(e0, branches) => {
                let (t, x, f0) = self.infer(env, e0)?;
                let labels: BTreeSet<String> = branches.keys().cloned().collect();
                let Some(rs) = match_case(&t, &labels) else {
                    return shape(&format!("a branching type over {{{}}}", names(&labels)), &t);
                };
                let mut arms = Vec::new();
                for (l, (xj, ej)) in branches {
                    let rj = Type::Sess(rs[l].clone());
                    env.push((xj.clone(), rj));
                    let res = self.infer(env, ej);
                    env.pop();
                    let (uj, mut yj, fj) = res?;
                    if !yj.remove(xj) {
                        return err(TypeErrorKind::LinearUnused(xj.clone()), ej.span);
                    }
                    arms.push((l.clone(), xj.clone(), uj, yj, fj, ej.span));
                }
                let y = arms[0].3.clone();
                for arm in &arms[1..] {
                    if arm.3 != y {
                        return err(TypeErrorKind::BranchSets { left: names(&y), right: names(&arm.3) }, span);
                    }
                }
                let mut u = arms[0].2.clone();
                for arm in &arms[1..] {
                    u = match join(&u, &arm.2) {
                        Some(j) => j,
                        None => return err(TypeErrorKind::NoJoin(u, arm.2.clone()), span),
                    };
                }
                self.disjoint(&x, &y, span)?;
                let f0 = self.smart_cast(f0, &t, &Type::Sess(Session::Offer(rs)), e0.span);
                let mut out = BTreeMap::new();
                for (l, xj, uj, _, fj, sp) in arms {
                    let fj = self.smart_cast(fj, &uj, &u, sp);
                    out.insert(l, (xj, fj));
                }
                Ok((u, &x | &y, Term::Case(Box::new(f0), out)))
            }
            ExprKind::Close(e1) | ExprKind::Wait(e1) => {
                let is_close = matches!(e.kind, ExprKind::Close(_));
                let end = if is_close { Type::end_out() } else { Type::end_in() };
                let (t, x, f) = self.infer(env, e1)?;
                self.check_cons(&t, &end, e1.span)?;
                let f = Box::new(self.smart_cast(f, &t, &end, e1.span));
                Ok((Type::Unit, x, if is_close { Term::Close(f) } else { Term::Wait(f) }))
            }
            ExprKind::Arith(op, args) => {
                let mut used = Lin::new();
                let mut typed = Vec::new();
                for a in args {
                    let (t, x, f) = self.infer(env, a)?;
                    self.check_cons(&t, &Type::Int, a.span)?;
                    self.disjoint(&used, &x, span)?;
                    used.extend(x);
                    typed.push((t, f, a.span));
                }
                let fs = typed.into_iter().map(|(t, f, sp)| self.smart_cast(f, &t, &Type::Int, sp)).collect();
                debug_assert_eq!(args.len(), op.arity());
                Ok((Type::Int, used, Term::Arith(*op, fs)))
            }
            ExprKind::If(c, e1, e2) => {
                let (tc, x, fc) = self.infer(env, c)?;
                self.check_cons(&tc, &Type::Int, c.span)?;
                let (t1, y1, f1) = self.infer(env, e1)?;
                let (t2, y2, f2) = self.infer(env, e2)?;
                if y1 != y2 {
                    return err(TypeErrorKind::BranchSets { left: names(&y1), right: names(&y2) }, span);
                }
                let Some(u) = join(&t1, &t2) else { return err(TypeErrorKind::NoJoin(t1, t2), span) };
                self.disjoint(&x, &y1, span)?;
                let fc = self.smart_cast(fc, &tc, &Type::Int, c.span);
                let f1 = self.smart_cast(f1, &t1, &u, e1.span);
                let f2 = self.smart_cast(f2, &t2, &u, e2.span);
                Ok((u, &x | &y1, Term::If(Box::new(fc), Box::new(f1), Box::new(f2))))
            }
        }
    }
}

fn env_vec(env: &TypeEnv) -> Vec<(String, Type)> {
    env.iter().map(|(x, t)| (x.clone(), t.clone())).collect()
}

/// The algorithmic typechecker: a type and the linear variables used.
pub fn tcexp(env: &TypeEnv, e: &Expr) -> Result<(Type, BTreeSet<String>), TypeError> {
    let mut c = Checker::new("");
    let (t, x, _) = c.infer(&mut env_vec(env), e)?;
    Ok((t, x))
}

/// Whole-program check: closed, and of unrestricted type.
pub fn check_program(e: &Expr) -> Result<Type, TypeError> {
    check_program_in(&TypeEnv::new(), e)
}

/// As [`check_program`], with unrestricted imports in scope.
pub fn check_program_in(env: &TypeEnv, e: &Expr) -> Result<Type, TypeError> {
    let (t, x) = tcexp(env, e)?;
    if let Some(z) = x.iter().next() {
        return err(TypeErrorKind::LinearUnused(z.clone()), e.span);
    }
    if !is_un(&t) {
        return err(TypeErrorKind::LinearResult(t), e.span);
    }
    Ok(t)
}

/// Cast insertion.  Labels are numbered from `first_label` in source order of
/// the cast subjects.
pub fn insert_casts(env: &TypeEnv, e: &Expr, file: &str, first_label: u32) -> Result<Elaborated, TypeError> {
    let mut c = Checker::new(file);
    let (ty, _, term) = c.infer(&mut env_vec(env), e)?;
    let mut labels = c.infos;
    let map = renumber(&mut labels, first_label);
    Ok(Elaborated { term: relabel(&term, &map), ty, labels })
}

/// Typecheck a closed program and elaborate it.
pub fn elaborate(e: &Expr, file: &str) -> Result<Elaborated, TypeError> {
    check_program(e)?;
    insert_casts(&TypeEnv::new(), e, file, 1)
}

/// The `⇒?` cast as a standalone function.
pub fn smart_cast(e: Term, from: &Type, to: &Type, p: BlameLabel) -> Term {
    assert!(consistent_sub(from, to), "cast {} => {} is inconsistent", from, to);
    if sub(from, to) {
        e
    } else {
        cast(e, from.clone(), to.clone(), p)
    }
}
