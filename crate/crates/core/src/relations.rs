//! Binary relations on types and the partial join/meet operations.
//!
//! Everything here is a plain structural recursion: the type grammar has no
//! recursion, so no memoization or coinduction is needed.

use std::collections::BTreeSet;

use crate::types::{Branches, Mult, Session, Type};

pub fn mult_sub(m: Mult, n: Mult) -> bool {
    m.leq(n)
}

// ---------------------------------------------------------------------------
// Subtyping and consistent subtyping share one recursion; `gradual` turns on
// the four axioms for Dyn and DC.

fn sub_gen(t: &Type, u: &Type, gradual: bool) -> bool {
    match (t, u) {
        (Type::Dyn, _) | (_, Type::Dyn) if gradual => true,
        (Type::Unit, Type::Unit) | (Type::Int, Type::Int) | (Type::Dyn, Type::Dyn) => true,
        (Type::Fn(m, a, b), Type::Fn(n, a2, b2)) => {
            m.leq(*n) && sub_gen(a2, a, gradual) && sub_gen(b, b2, gradual)
        }
        (Type::Prod(m, a, b), Type::Prod(n, a2, b2)) => {
            m.leq(*n) && sub_gen(a, a2, gradual) && sub_gen(b, b2, gradual)
        }
        (Type::Sess(s), Type::Sess(r)) => sub_sess_gen(s, r, gradual),
        _ => false,
    }
}

fn sub_sess_gen(s: &Session, r: &Session, gradual: bool) -> bool {
    match (s, r) {
        (Session::DC, _) | (_, Session::DC) if gradual => true,
        (Session::DC, Session::DC) => true,
        (Session::Send(t, s1), Session::Send(t2, s2)) => {
            sub_gen(t2, t, gradual) && sub_sess_gen(s1, s2, gradual)
        }
        (Session::Recv(t, s1), Session::Recv(t2, s2)) => {
            sub_gen(t, t2, gradual) && sub_sess_gen(s1, s2, gradual)
        }
        // select: the supertype offers fewer labels
        (Session::Select(i), Session::Select(j)) => j
            .iter()
            .all(|(l, rj)| i.get(l).is_some_and(|si| sub_sess_gen(si, rj, gradual))),
        // case: the supertype handles more labels
        (Session::Offer(i), Session::Offer(j)) => i
            .iter()
            .all(|(l, si)| j.get(l).is_some_and(|rj| sub_sess_gen(si, rj, gradual))),
        (Session::EndOut, Session::EndOut) | (Session::EndIn, Session::EndIn) => true,
        _ => false,
    }
}

/// `T ≤ U`.
pub fn sub(t: &Type, u: &Type) -> bool {
    sub_gen(t, u, false)
}

pub fn sub_sess(s: &Session, r: &Session) -> bool {
    sub_sess_gen(s, r, false)
}

/// `T ≲ U`.
pub fn consistent_sub(t: &Type, u: &Type) -> bool {
    sub_gen(t, u, true)
}

pub fn consistent_sub_sess(s: &Session, r: &Session) -> bool {
    sub_sess_gen(s, r, true)
}

/// `T ~ U`.
pub fn consistent(t: &Type, u: &Type) -> bool {
    consistent_sub(t, u) && consistent_sub(u, t)
}

// ---------------------------------------------------------------------------
// Positive and negative subtyping.  `pos == true` is ≤+, `false` is ≤−;
// contravariant positions flip the polarity.

fn pn(t: &Type, u: &Type, pos: bool) -> bool {
    match (t, u) {
        (_, Type::Dyn) if pos => true,
        (Type::Dyn, _) if !pos => true,
        (Type::Unit, Type::Unit) | (Type::Int, Type::Int) => true,
        (Type::Fn(m, a, b), Type::Fn(n, a2, b2)) => m.leq(*n) && pn(a2, a, !pos) && pn(b, b2, pos),
        (Type::Prod(m, a, b), Type::Prod(n, a2, b2)) => m.leq(*n) && pn(a, a2, pos) && pn(b, b2, pos),
        (Type::Sess(s), Type::Sess(r)) => pn_sess(s, r, pos),
        _ => false,
    }
}

fn pn_sess(s: &Session, r: &Session, pos: bool) -> bool {
    match (s, r) {
        (_, Session::DC) if pos => true,
        (Session::DC, _) if !pos => true,
        (Session::Send(t, s1), Session::Send(t2, s2)) => pn(t2, t, !pos) && pn_sess(s1, s2, pos),
        (Session::Recv(t, s1), Session::Recv(t2, s2)) => pn(t, t2, pos) && pn_sess(s1, s2, pos),
        (Session::Select(i), Session::Select(j)) => j
            .iter()
            .all(|(l, rj)| i.get(l).is_some_and(|si| pn_sess(si, rj, pos))),
        (Session::Offer(i), Session::Offer(j)) => i
            .iter()
            .all(|(l, si)| j.get(l).is_some_and(|rj| pn_sess(si, rj, pos))),
        (Session::EndOut, Session::EndOut) | (Session::EndIn, Session::EndIn) => true,
        _ => false,
    }
}

/// `T ≤+ U`: a cast from `T` to `U` never blames its positive label.
pub fn pos_sub(t: &Type, u: &Type) -> bool {
    pn(t, u, true)
}

/// `T ≤− U`: a cast from `T` to `U` never blames its negative label.
pub fn neg_sub(t: &Type, u: &Type) -> bool {
    pn(t, u, false)
}

pub fn pos_sub_sess(s: &Session, r: &Session) -> bool {
    pn_sess(s, r, true)
}

pub fn neg_sub_sess(s: &Session, r: &Session) -> bool {
    pn_sess(s, r, false)
}

// ---------------------------------------------------------------------------
// Naive subtyping (precision): covariant everywhere, equal multiplicities and
// equal label sets.

pub fn precision(t: &Type, u: &Type) -> bool {
    match (t, u) {
        (_, Type::Dyn) => true,
        (Type::Unit, Type::Unit) | (Type::Int, Type::Int) => true,
        (Type::Fn(m, a, b), Type::Fn(n, a2, b2)) | (Type::Prod(m, a, b), Type::Prod(n, a2, b2)) => {
            m == n && precision(a, a2) && precision(b, b2)
        }
        (Type::Sess(s), Type::Sess(r)) => precision_sess(s, r),
        _ => false,
    }
}

pub fn precision_sess(s: &Session, r: &Session) -> bool {
    match (s, r) {
        (_, Session::DC) => true,
        (Session::Send(t, s1), Session::Send(t2, s2)) | (Session::Recv(t, s1), Session::Recv(t2, s2)) => {
            precision(t, t2) && precision_sess(s1, s2)
        }
        (Session::Select(i), Session::Select(j)) | (Session::Offer(i), Session::Offer(j)) => {
            i.len() == j.len()
                && i.iter().all(|(l, si)| j.get(l).is_some_and(|rj| precision_sess(si, rj)))
        }
        (Session::EndOut, Session::EndOut) | (Session::EndIn, Session::EndIn) => true,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Matching.

/// `T ▷ T1 →m T2`.
pub fn match_fun(t: &Type) -> Option<(Mult, Type, Type)> {
    match t {
        Type::Fn(m, a, b) => Some((*m, (**a).clone(), (**b).clone())),
        Type::Dyn => Some((Mult::Lin, Type::Dyn, Type::Dyn)),
        _ => None,
    }
}

/// `T ▷ T1 ×m T2`.
pub fn match_prod(t: &Type) -> Option<(Mult, Type, Type)> {
    match t {
        Type::Prod(m, a, b) => Some((*m, (**a).clone(), (**b).clone())),
        Type::Dyn => Some((Mult::Lin, Type::Dyn, Type::Dyn)),
        _ => None,
    }
}

fn is_dynamic(t: &Type) -> bool {
    matches!(t, Type::Dyn | Type::Sess(Session::DC))
}

/// `T ▷ !T'.S`.
pub fn match_send(t: &Type) -> Option<(Type, Session)> {
    match t {
        Type::Sess(Session::Send(a, s)) => Some(((**a).clone(), (**s).clone())),
        _ if is_dynamic(t) => Some((Type::Dyn, Session::DC)),
        _ => None,
    }
}

/// `T ▷ ?T'.S`.
pub fn match_recv(t: &Type) -> Option<(Type, Session)> {
    match t {
        Type::Sess(Session::Recv(a, s)) => Some(((**a).clone(), (**s).clone())),
        _ if is_dynamic(t) => Some((Type::Dyn, Session::DC)),
        _ => None,
    }
}

/// `T ▷ ⊕{l: S}`; returns the residual `S`.
pub fn match_select(t: &Type, label: &str) -> Option<Session> {
    match t {
        Type::Sess(Session::Select(bs)) => bs.get(label).cloned(),
        _ if is_dynamic(t) => Some(Session::DC),
        _ => None,
    }
}

/// `T ▷ &{l_j: R_j}_{j ∈ J}` for the requested label set `J`.  A concrete
/// offer with labels `I ⊆ J` is padded with `DC` residuals.
pub fn match_case(t: &Type, labels: &BTreeSet<String>) -> Option<Branches> {
    match t {
        Type::Sess(Session::Offer(bs)) => {
            if !bs.keys().all(|l| labels.contains(l)) {
                return None;
            }
            Some(
                labels
                    .iter()
                    .map(|l| (l.clone(), bs.get(l).cloned().unwrap_or(Session::DC)))
                    .collect(),
            )
        }
        _ if is_dynamic(t) => Some(labels.iter().map(|l| (l.clone(), Session::DC)).collect()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Join and meet.  With `gradual` set, Dyn and DC are absorbing units; without
// it they only join with themselves, which gives the ordinary least upper
// bound for subtyping (used by the internal typechecker).

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Join,
    Meet,
}

impl Op {
    fn flip(self) -> Op {
        match self {
            Op::Join => Op::Meet,
            Op::Meet => Op::Join,
        }
    }

    fn mult(self, m: Mult, n: Mult) -> Mult {
        match self {
            Op::Join => m.join(n),
            Op::Meet => m.meet(n),
        }
    }
}

fn lattice(op: Op, t: &Type, u: &Type, gradual: bool) -> Option<Type> {
    match (t, u) {
        (Type::Dyn, x) | (x, Type::Dyn) if gradual => Some(x.clone()),
        (Type::Dyn, Type::Dyn) => Some(Type::Dyn),
        (Type::Unit, Type::Unit) => Some(Type::Unit),
        (Type::Int, Type::Int) => Some(Type::Int),
        (Type::Fn(m, a, b), Type::Fn(n, a2, b2)) => Some(Type::Fn(
            op.mult(*m, *n),
            Box::new(lattice(op.flip(), a, a2, gradual)?),
            Box::new(lattice(op, b, b2, gradual)?),
        )),
        (Type::Prod(m, a, b), Type::Prod(n, a2, b2)) => Some(Type::Prod(
            op.mult(*m, *n),
            Box::new(lattice(op, a, a2, gradual)?),
            Box::new(lattice(op, b, b2, gradual)?),
        )),
        (Type::Sess(s), Type::Sess(r)) => lattice_sess(op, s, r, gradual).map(Type::Sess),
        _ => None,
    }
}

fn lattice_sess(op: Op, s: &Session, r: &Session, gradual: bool) -> Option<Session> {
    match (s, r) {
        (Session::DC, x) | (x, Session::DC) if gradual => Some(x.clone()),
        (Session::DC, Session::DC) => Some(Session::DC),
        (Session::Send(t, s1), Session::Send(t2, s2)) => Some(Session::Send(
            Box::new(lattice(op.flip(), t, t2, gradual)?),
            Box::new(lattice_sess(op, s1, s2, gradual)?),
        )),
        (Session::Recv(t, s1), Session::Recv(t2, s2)) => Some(Session::Recv(
            Box::new(lattice(op, t, t2, gradual)?),
            Box::new(lattice_sess(op, s1, s2, gradual)?),
        )),
        (Session::Select(i), Session::Select(j)) => {
            let bs = match op {
                Op::Join => intersect(op, i, j, gradual),
                Op::Meet => union(op, i, j, gradual)?,
            };
            (!bs.is_empty()).then_some(Session::Select(bs))
        }
        (Session::Offer(i), Session::Offer(j)) => {
            let bs = match op {
                Op::Join => union(op, i, j, gradual)?,
                Op::Meet => intersect(op, i, j, gradual),
            };
            (!bs.is_empty()).then_some(Session::Offer(bs))
        }
        (Session::EndOut, Session::EndOut) => Some(Session::EndOut),
        (Session::EndIn, Session::EndIn) => Some(Session::EndIn),
        _ => None,
    }
}

// Common labels whose residuals combine; the others are dropped.
fn intersect(op: Op, i: &Branches, j: &Branches, gradual: bool) -> Branches {
    i.iter()
        .filter_map(|(l, si)| {
            let rj = j.get(l)?;
            Some((l.clone(), lattice_sess(op, si, rj, gradual)?))
        })
        .collect()
}

// All labels; common residuals must combine.
fn union(op: Op, i: &Branches, j: &Branches, gradual: bool) -> Option<Branches> {
    let mut out = Branches::new();
    for (l, si) in i {
        let v = match j.get(l) {
            Some(rj) => lattice_sess(op, si, rj, gradual)?,
            None => si.clone(),
        };
        out.insert(l.clone(), v);
    }
    for (l, rj) in j {
        if !i.contains_key(l) {
            out.insert(l.clone(), rj.clone());
        }
    }
    Some(out)
}

/// `T ∨ U`, or `None` when undefined.
pub fn join(t: &Type, u: &Type) -> Option<Type> {
    lattice(Op::Join, t, u, true)
}

/// `T ∧ U`, or `None` when undefined.
pub fn meet(t: &Type, u: &Type) -> Option<Type> {
    lattice(Op::Meet, t, u, true)
}

pub fn join_sess(s: &Session, r: &Session) -> Option<Session> {
    lattice_sess(Op::Join, s, r, true)
}

pub fn meet_sess(s: &Session, r: &Session) -> Option<Session> {
    lattice_sess(Op::Meet, s, r, true)
}

/// Least upper bound for plain subtyping: Dyn and DC only combine with
/// themselves.
pub fn sub_join(t: &Type, u: &Type) -> Option<Type> {
    lattice(Op::Join, t, u, false)
}

pub fn sub_meet(t: &Type, u: &Type) -> Option<Type> {
    lattice(Op::Meet, t, u, false)
}
