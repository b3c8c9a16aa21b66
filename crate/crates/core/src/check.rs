//! Typing for the internal language, well-typed configurations, and blame
//! safety.
//!
//! Internal terms are checked against exact shapes, with subsumption at
//! argument positions and at the source of every cast.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::blame::BlameLabel;
use crate::config::{Config, Proc};
use crate::relations::{consistent_sub, neg_sub, pos_sub, sub, sub_join};
use crate::term::{Name, Term};
use crate::types::{dual, fun, is_lin, is_un, prod, Mult, Session, Type};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("unbound name {0}")]
    Unbound(String),
    #[error("linear name {0} is never used")]
    LinearUnused(Name),
    #[error("linear name {0} used twice")]
    LinearTwice(Name),
    #[error("linear name {0} escapes an unrestricted abstraction")]
    EscapesUn(Name),
    #[error("unrestricted pair has a component of linear type {0}")]
    LinearInUnPair(Type),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: Type },
    #[error("{found} is not a subtype of {expected}")]
    NotSubtype { found: Type, expected: Type },
    #[error("branches use different linear names")]
    BranchSets,
    #[error("join failure: {0} and {1} have no join")]
    NoJoin(Type, Type),
    #[error("cast source mismatch: body has type {found}, cast expects {declared}")]
    CastSource { found: Type, declared: Type },
    #[error("inconsistent cast {from} => {to}")]
    InconsistentCast { from: Type, to: Type },
    #[error("ill-formed configuration: {0}")]
    Config(String),
}

pub type Names = BTreeSet<Name>;

struct Env<'a> {
    vars: Vec<(String, Type)>,
    chans: &'a BTreeMap<u32, Type>,
}

fn shape<T>(expected: &str, found: &Type) -> Result<T, CheckError> {
    Err(CheckError::Shape { expected: expected.to_string(), found: found.clone() })
}

fn disjoint(x: &Names, y: &Names) -> Result<(), CheckError> {
    match x.intersection(y).next() {
        Some(z) => Err(CheckError::LinearTwice(z.clone())),
        None => Ok(()),
    }
}

fn expect_sub(found: &Type, expected: &Type) -> Result<(), CheckError> {
    if sub(found, expected) {
        Ok(())
    } else {
        Err(CheckError::NotSubtype { found: found.clone(), expected: expected.clone() })
    }
}

fn session(t: &Type) -> Option<&Session> {
    t.as_session()
}

/// Bind `x : t` over `body`'s result and discharge it.
fn bind(
    env: &mut Env,
    x: &str,
    t: &Type,
    body: &Term,
) -> Result<(Type, Names), CheckError> {
    env.vars.push((x.to_string(), t.clone()));
    let res = infer(env, body);
    env.vars.pop();
    let (u, mut y) = res?;
    if is_lin(t) && !y.remove(&Name::Var(x.to_string())) {
        return Err(CheckError::LinearUnused(Name::Var(x.to_string())));
    }
    Ok((u, y))
}

fn infer(env: &mut Env, e: &Term) -> Result<(Type, Names), CheckError> {
    match e {
        Term::Var(z) => {
            let t = match env.vars.iter().rev().find(|(x, _)| x == z) {
                Some((_, t)) => t.clone(),
                None => return Err(CheckError::Unbound(z.clone())),
            };
            let lin = if is_lin(&t) { Names::from([Name::Var(z.clone())]) } else { Names::new() };
            Ok((t, lin))
        }
        Term::Chan(c) => match env.chans.get(c) {
            Some(t) => Ok((t.clone(), Names::from([Name::Chan(*c)]))),
            None => Err(CheckError::Unbound(format!("c{}", c))),
        },
        Term::Ref(_) => Ok((Type::Dyn, Names::new())),
        Term::Unit => Ok((Type::Unit, Names::new())),
        Term::Int(_) => Ok((Type::Int, Names::new())),
        Term::Lam(m, x, t1, body) => {
            let (t2, y) = bind(env, x, t1, body)?;
            if *m == Mult::Un {
                if let Some(z) = y.iter().next() {
                    return Err(CheckError::EscapesUn(z.clone()));
                }
            }
            Ok((fun(*m, t1.clone(), t2), y))
        }
        Term::App(f, a) => {
            let (t1, x) = infer(env, f)?;
            let (t2, y) = infer(env, a)?;
            disjoint(&x, &y)?;
            let Type::Fn(_, t11, t12) = &t1 else { return shape("a function type", &t1) };
            expect_sub(&t2, t11)?;
            Ok(((**t12).clone(), &x | &y))
        }
        Term::Pair(m, a, b) => {
            let (t1, x) = infer(env, a)?;
            let (t2, y) = infer(env, b)?;
            disjoint(&x, &y)?;
            if *m == Mult::Un {
                for t in [&t1, &t2] {
                    if !is_un(t) {
                        return Err(CheckError::LinearInUnPair(t.clone()));
                    }
                }
            }
            Ok((prod(*m, t1, t2), &x | &y))
        }
        Term::LetPair(x1, x2, a, body) => {
            let (t, y) = infer(env, a)?;
            let Type::Prod(_, t1, t2) = &t else { return shape("a product type", &t) };
            env.vars.push((x1.clone(), (**t1).clone()));
            env.vars.push((x2.clone(), (**t2).clone()));
            let res = infer(env, body);
            env.vars.truncate(env.vars.len() - 2);
            let (u, mut z) = res?;
            if is_lin(t1) && x1 != x2 && !z.remove(&Name::Var(x1.clone())) {
                return Err(CheckError::LinearUnused(Name::Var(x1.clone())));
            }
            if is_lin(t2) && !z.remove(&Name::Var(x2.clone())) {
                return Err(CheckError::LinearUnused(Name::Var(x2.clone())));
            }
            disjoint(&y, &z)?;
            Ok((u, &y | &z))
        }
        Term::Fork(a) => {
            let (t, x) = infer(env, a)?;
            expect_sub(&t, &Type::Unit)?;
            Ok((Type::Unit, x))
        }
        Term::New(s) => Ok((prod(Mult::Lin, Type::Sess(s.clone()), Type::Sess(dual(s))), Names::new())),
        Term::Send(v, c) => {
            let (t1, x) = infer(env, v)?;
            let (t2, y) = infer(env, c)?;
            disjoint(&x, &y)?;
            let Some(Session::Send(t3, s)) = session(&t2) else { return shape("a send type", &t2) };
            expect_sub(&t1, t3)?;
            Ok((Type::Sess((**s).clone()), &x | &y))
        }
        Term::Receive(c) => {
            let (t, x) = infer(env, c)?;
            let Some(Session::Recv(t2, s)) = session(&t) else { return shape("a receive type", &t) };
            Ok((prod(Mult::Lin, (**t2).clone(), Type::Sess((**s).clone())), x))
        }
        Term::Select(l, c) => {
            let (t, x) = infer(env, c)?;
            match session(&t) {
                Some(Session::Select(bs)) if bs.contains_key(l) => Ok((Type::Sess(bs[l].clone()), x)),
                _ => shape(&format!("a selection offering {}", l), &t),
            }
        }
        Term::Case(c, branches) => {
            let (t, x) = infer(env, c)?;
            let offered = match session(&t) {
                Some(Session::Offer(bs)) if bs.keys().all(|l| branches.contains_key(l)) => bs.clone(),
                _ => return shape("a branching type covered by the case", &t),
            };
            let mut ys: Option<Names> = None;
            let mut u: Option<Type> = None;
            for (l, (xj, ej)) in branches {
                // labels the scrutinee never offers are typed at DC
                let rj = Type::Sess(offered.get(l).cloned().unwrap_or(Session::DC));
                let (uj, yj) = bind(env, xj, &rj, ej)?;
                match &ys {
                    Some(y) if *y != yj => return Err(CheckError::BranchSets),
                    _ => ys = Some(yj),
                }
                u = Some(match u {
                    None => uj,
                    Some(prev) => match sub_join(&prev, &uj) {
                        Some(j) => j,
                        None => return Err(CheckError::NoJoin(prev, uj)),
                    },
                });
            }
            let (Some(y), Some(u)) = (ys, u) else { return shape("at least one branch", &t) };
            disjoint(&x, &y)?;
            Ok((u, &x | &y))
        }
        Term::Close(c) | Term::Wait(c) => {
            let end = if matches!(e, Term::Close(_)) { Type::end_out() } else { Type::end_in() };
            let (t, x) = infer(env, c)?;
            if t != end {
                return shape(&end.to_string(), &t);
            }
            Ok((Type::Unit, x))
        }
        Term::Arith(_, args) => {
            let mut used = Names::new();
            for a in args {
                let (t, x) = infer(env, a)?;
                expect_sub(&t, &Type::Int)?;
                disjoint(&used, &x)?;
                used.extend(x);
            }
            Ok((Type::Int, used))
        }
        Term::If(c, a, b) => {
            let (tc, x) = infer(env, c)?;
            expect_sub(&tc, &Type::Int)?;
            let (t1, y1) = infer(env, a)?;
            let (t2, y2) = infer(env, b)?;
            if y1 != y2 {
                return Err(CheckError::BranchSets);
            }
            let Some(u) = sub_join(&t1, &t2) else { return Err(CheckError::NoJoin(t1, t2)) };
            disjoint(&x, &y1)?;
            Ok((u, &x | &y1))
        }
        Term::Cast(body, from, to, _) => {
            let (t, x) = infer(env, body)?;
            if !sub(&t, from) {
                return Err(CheckError::CastSource { found: t, declared: from.clone() });
            }
            if !consistent_sub(from, to) {
                return Err(CheckError::InconsistentCast { from: from.clone(), to: to.clone() });
            }
            Ok((to.clone(), x))
        }
    }
}

/// Type an internal term. Variables come from `env`; channel endpoints are
/// written as variables `c0`, `c1`, ... only through [`tc_term`].
pub fn tc_internal(env: &BTreeMap<String, Type>, e: &Term) -> Result<(Type, Names), CheckError> {
    let chans = BTreeMap::new();
    let mut env = Env { vars: env.iter().map(|(x, t)| (x.clone(), t.clone())).collect(), chans: &chans };
    infer(&mut env, e)
}

/// Type a closed runtime term whose endpoints have the given types.
pub fn tc_term(chans: &BTreeMap<u32, Type>, e: &Term) -> Result<(Type, Names), CheckError> {
    let mut env = Env { vars: Vec::new(), chans };
    infer(&mut env, e)
}

fn config_err<T>(msg: String) -> Result<T, CheckError> {
    Err(CheckError::Config(msg))
}

/// Check that a configuration is well typed: every expression process has
/// unrestricted type, every cell holds a value of linear ground type, and
/// the linear endpoints are partitioned among the processes.
pub fn tc_config(cfg: &Config) -> Result<(), CheckError> {
    let chans: BTreeMap<u32, Type> = cfg
        .endpoints()
        .into_iter()
        .map(|c| (c, Type::Sess(cfg.chan_type(c).expect("live endpoint"))))
        .collect();
    let mut owned: BTreeMap<u32, u32> = BTreeMap::new();
    let mut cells: BTreeSet<u32> = BTreeSet::new();
    let mut refs: BTreeSet<u32> = BTreeSet::new();
    for p in &cfg.procs {
        let used: BTreeSet<u32> = match &p.body {
            Proc::Expr(t) => {
                let (ty, x) = tc_term(&chans, t)?;
                if !is_un(&ty) {
                    return config_err(format!("process {} has linear type {}", p.id, ty));
                }
                refs.extend(t.refs());
                x.into_iter().filter_map(|n| if let Name::Chan(c) = n { Some(c) } else { None }).collect()
            }
            Proc::Cell { r, value, ground, .. } => {
                if !is_lin(ground) {
                    return config_err(format!("cell a{} holds unrestricted type {}", r, ground));
                }
                if !cells.insert(*r) {
                    return config_err(format!("reference a{} has two cells", r));
                }
                let (ty, x) = tc_term(&chans, value)?;
                expect_sub(&ty, ground)?;
                refs.extend(value.refs());
                x.into_iter().filter_map(|n| if let Name::Chan(c) = n { Some(c) } else { None }).collect()
            }
            Proc::Locked { r, .. } => {
                if !cells.insert(*r) {
                    return config_err(format!("reference a{} has two cells", r));
                }
                BTreeSet::new()
            }
            Proc::Blame { lin, .. } | Proc::BlameGc { lin, .. } => lin.clone(),
        };
        for c in used {
            if let Some(other) = owned.insert(c, p.id) {
                return config_err(format!("c{} is used by processes {} and {}", c, other, p.id));
            }
        }
    }
    for c in cfg.endpoints() {
        if !owned.contains_key(&c) {
            return config_err(format!("endpoint c{} is never used", c));
        }
    }
    if let Some(c) = owned.keys().find(|c| !chans.contains_key(c)) {
        return config_err(format!("endpoint c{} is not bound", c));
    }
    if let Some(r) = refs.iter().find(|r| !cells.contains(r)) {
        return config_err(format!("reference a{} has no cell", r));
    }
    Ok(())
}

/// Whether a term can never blame `p`: every cast labelled `p` is a positive
/// subtype cast and every cast labelled with its complement is a negative one.
pub fn safe_for(e: &Term, p: BlameLabel) -> bool {
    let mut ok = true;
    e.visit(&mut |t| {
        if let Term::Cast(_, from, to, q) = t {
            ok &= cast_safe(from, to, *q, p);
        }
    });
    ok
}

fn cast_safe(from: &Type, to: &Type, q: BlameLabel, p: BlameLabel) -> bool {
    if q == p {
        pos_sub(from, to)
    } else if q.complement() == p {
        neg_sub(from, to)
    } else {
        true
    }
}

/// Blame safety lifted to configurations. A full cell behaves like the cast
/// it stores; a locked cell will blame the complement of its label.
pub fn safe_for_config(cfg: &Config, p: BlameLabel) -> bool {
    cfg.procs.iter().all(|proc| match &proc.body {
        Proc::Expr(t) => safe_for(t, p),
        Proc::Cell { value, ground, label, .. } => {
            safe_for(value, p) && cast_safe(ground, &Type::Dyn, *label, p)
        }
        Proc::Locked { label, .. } => label.complement() != p,
        Proc::Blame { p: q, q: q2, .. } => *q != p && *q2 != p,
        Proc::BlameGc { p: q, .. } => *q != p,
    })
}
