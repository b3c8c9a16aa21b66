//! Laws of the type relations, as functions returning the failures found.

use std::collections::BTreeSet;

use ggv_core::relations::*;
use ggv_core::types::{
    dual, fun, ground_of, ground_session_of, is_ground, is_ground_session, mult_of, prod, recv, select, send, Mult,
    Session, Type,
};

use super::{ground_sessions, ground_types, LABELS};

/// The names of the laws that fail at `(t, u)`.
pub fn pairwise_laws(t: &Type, u: &Type) -> Vec<&'static str> {
    let mut bad = Vec::new();
    let (s, cs, p, n, pr) = (sub(t, u), consistent_sub(t, u), pos_sub(t, u), neg_sub(t, u), precision(t, u));
    if s && !(p && n) {
        bad.push("tangram: sub implies pos and neg");
    }
    if pr != (p && neg_sub(u, t)) {
        bad.push("tangram: precision iff pos and reverse neg");
    }
    if (p || n) && !cs {
        bad.push("hierarchy: polarised subtyping within consistent subtyping");
    }
    if consistent(t, u) != (cs && consistent_sub(u, t)) {
        bad.push("consistency is two-way consistent subtyping");
    }
    if pr && !consistent(t, u) {
        bad.push("precision implies consistency");
    }
    if let Some(j) = join(t, u) {
        if !(neg_sub(t, &j) && neg_sub(u, &j)) {
            bad.push("join is a negative upper bound");
        }
        if join(u, t).as_ref() != Some(&j) {
            bad.push("join commutes");
        }
    }
    if let Some(m) = meet(t, u) {
        if !(pos_sub(&m, t) && pos_sub(&m, u)) {
            bad.push("meet is a positive lower bound");
        }
    }
    if t.is_static() && u.is_static() && s != cs {
        bad.push("consistent subtyping is subtyping on static types");
    }
    bad
}

fn fail_list<T: std::fmt::Display>(bad: &[T]) -> String {
    bad.iter().take(5).map(|t| t.to_string()).collect::<Vec<_>>().join("; ")
}

/// `Err` with a summary of the first few failures, if there are any.
pub fn verdict(bad: Vec<String>) -> Result<(), String> {
    if bad.is_empty() {
        Ok(())
    } else {
        Err(format!("{} failures: {}", bad.len(), fail_list(&bad)))
    }
}

/// Reflexivity, ground types, linearity of sessions and duality, one type
/// at a time.
pub fn unary_failures(types: &[Type], sessions: &[Session]) -> Vec<String> {
    let mut bad = Vec::new();
    for t in types {
        let refl = sub(t, t) && consistent_sub(t, t) && pos_sub(t, t) && neg_sub(t, t) && precision(t, t);
        if !refl {
            bad.push(format!("reflexivity at {}", t));
        }
        match ground_of(t) {
            None => {
                if *t != Type::Dyn {
                    bad.push(format!("no ground type for {}", t));
                }
            }
            Some(g) => {
                if !is_ground(&g) || !consistent(t, &g) {
                    bad.push(format!("ground_of({}) = {}", t, g));
                }
                let others: Vec<_> = ground_types().into_iter().filter(|h| *h != g && consistent(t, h)).collect();
                if !others.is_empty() {
                    bad.push(format!("{} is consistent with grounds {} and {}", t, g, others[0]));
                }
            }
        }
        if let Type::Sess(s) = t {
            if mult_of(t) != Mult::Lin {
                bad.push(format!("session {} is not linear", t));
            }
            if dual(&dual(s)) != *s {
                bad.push(format!("dual not an involution at {}", s));
            }
        }
    }
    for s in sessions {
        if let Some(g) = ground_session_of(s) {
            let others: Vec<_> = ground_sessions()
                .into_iter()
                .filter(|h| *h != g && consistent_sub_sess(s, h) && consistent_sub_sess(h, s))
                .collect();
            if !is_ground_session(&g) || !others.is_empty() {
                bad.push(format!("ground session of {}", s));
            }
        }
    }
    bad
}

/// Whatever a type matches is a consistent supertype of it.
pub fn matching_failures(types: &[Type]) -> Vec<String> {
    let label_sets: Vec<BTreeSet<String>> = vec![
        ["a"].iter().map(|s| s.to_string()).collect(),
        ["b"].iter().map(|s| s.to_string()).collect(),
        LABELS.iter().map(|s| s.to_string()).collect(),
    ];
    let mut bad = Vec::new();
    for t in types {
        let mut check = |u: Type| {
            if !consistent_sub(t, &u) {
                bad.push(format!("{} ▷ {}", t, u));
            }
        };
        if let Some((m, a, b)) = match_fun(t) {
            check(fun(m, a, b));
        }
        if let Some((m, a, b)) = match_prod(t) {
            check(prod(m, a, b));
        }
        if let Some((a, s)) = match_send(t) {
            check(Type::Sess(send(a, s)));
        }
        if let Some((a, s)) = match_recv(t) {
            check(Type::Sess(recv(a, s)));
        }
        for l in LABELS {
            if let Some(s) = match_select(t, l) {
                check(Type::Sess(select([(l, s)])));
            }
        }
        for ls in &label_sets {
            if let Some(bs) = match_case(t, ls) {
                if bs.keys().cloned().collect::<BTreeSet<_>>() != *ls {
                    // an offer over other labels is never a consistent supertype
                    check(Type::Unit);
                }
                check(Type::Sess(Session::Offer(bs)));
            }
        }
    }
    bad
}

pub fn pairwise_failures(ts: &[Type]) -> Vec<String> {
    let mut bad = Vec::new();
    for t in ts {
        for u in ts {
            for law in pairwise_laws(t, u) {
                bad.push(format!("{} at ({}, {})", law, t, u));
            }
        }
    }
    bad
}

/// Duality turns subtyping around, and consistent subtyping too.
pub fn duality_failures(ss: &[Session]) -> Vec<String> {
    let mut bad = Vec::new();
    for s in ss {
        for r in ss {
            if sub_sess(s, r) != sub_sess(&dual(r), &dual(s)) {
                bad.push(format!("sub {} {}", s, r));
            }
            if consistent_sub_sess(&dual(s), r) != consistent_sub_sess(&dual(r), s) {
                bad.push(format!("csub {} {}", s, r));
            }
        }
    }
    bad
}

/// Join is the least negative upper bound and meet the greatest positive
/// lower bound, within `ts`.
pub fn least_bound_failures(ts: &[Type]) -> Vec<String> {
    let mut bad = Vec::new();
    for u in ts {
        let below: Vec<&Type> = ts.iter().filter(|t| neg_sub(t, u)).collect();
        for t1 in &below {
            for t2 in &below {
                match join(t1, t2) {
                    Some(j) if neg_sub(&j, u) => {}
                    j => bad.push(format!("lub {} {} under {} gave {:?}", t1, t2, u, j.map(|j| j.to_string()))),
                }
            }
        }
        let above: Vec<&Type> = ts.iter().filter(|t| pos_sub(u, t)).collect();
        for t1 in &above {
            for t2 in &above {
                match meet(t1, t2) {
                    Some(m) if pos_sub(u, &m) => {}
                    m => bad.push(format!("glb {} {} over {} gave {:?}", t1, t2, u, m.map(|m| m.to_string()))),
                }
            }
        }
    }
    bad
}
