#![allow(dead_code)]

pub mod gv;
pub mod laws;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use ggv_core::load::{load_typed, load_untyped, Loaded};
use ggv_core::types::{fun, prod, recv, send, Branches, Mult, Session, Type};

pub const MULTS: [Mult; 2] = [Mult::Un, Mult::Lin];
pub const LABELS: [&str; 2] = ["a", "b"];

fn label_sets() -> Vec<Vec<&'static str>> {
    vec![vec!["a"], vec!["b"], vec!["a", "b"]]
}

/// Every branch map over a non-empty subset of {a, b} with residuals drawn
/// from `pool`.
fn branch_maps(pool: &[Session]) -> Vec<Branches> {
    let mut out = Vec::new();
    for set in label_sets() {
        let mut acc: Vec<Branches> = vec![BTreeMap::new()];
        for l in set {
            let mut next = Vec::new();
            for m in &acc {
                for s in pool {
                    let mut m = m.clone();
                    m.insert(l.to_string(), s.clone());
                    next.push(m);
                }
            }
            acc = next;
        }
        out.extend(acc);
    }
    out
}

/// Types and session types of depth at most `d`, as the pair
/// `(types, sessions)`.  Base types are Unit, Int, Dyn; base sessions are
/// End!, End?, DC.
pub fn universe(d: usize) -> (Vec<Type>, Vec<Session>) {
    let mut types = vec![Type::Unit, Type::Int, Type::Dyn];
    let mut sessions = vec![Session::EndOut, Session::EndIn, Session::DC];
    types.extend(sessions.iter().cloned().map(Type::Sess));
    for _ in 1..d {
        let (ts, ss) = (types.clone(), sessions.clone());
        let mut new_ss = Vec::new();
        for t in &ts {
            for s in &ss {
                new_ss.push(send(t.clone(), s.clone()));
                new_ss.push(recv(t.clone(), s.clone()));
            }
        }
        for bs in branch_maps(&ss) {
            new_ss.push(Session::Select(bs.clone()));
            new_ss.push(Session::Offer(bs));
        }
        let mut new_ts = Vec::new();
        for m in MULTS {
            for t in &ts {
                for u in &ts {
                    new_ts.push(fun(m, t.clone(), u.clone()));
                    new_ts.push(prod(m, t.clone(), u.clone()));
                }
            }
        }
        new_ts.extend(new_ss.iter().cloned().map(Type::Sess));
        // keep only the newly reachable layer on top of the old one
        let depth = types.iter().map(Type::depth).max().unwrap_or(1);
        types.extend(new_ts.into_iter().filter(|t| t.depth() > depth));
        sessions.extend(new_ss.into_iter().filter(|s| s.depth() > depth));
    }
    (types, sessions)
}

pub fn ground_types() -> Vec<Type> {
    let mut out = vec![Type::Unit, Type::Int, Type::dc()];
    for m in MULTS {
        out.push(fun(m, Type::Dyn, Type::Dyn));
        out.push(prod(m, Type::Dyn, Type::Dyn));
    }
    out
}

pub fn ground_sessions() -> Vec<Session> {
    let mut out = vec![send(Type::Dyn, Session::DC), recv(Type::Dyn, Session::DC), Session::EndOut, Session::EndIn];
    for bs in branch_maps(&[Session::DC]) {
        out.push(Session::Select(bs.clone()));
        out.push(Session::Offer(bs));
    }
    out
}

// ---------------------------------------------------------------------------
// Random types.  `arb_pair` grows two types over a shared skeleton, so that
// related pairs (the interesting ones for every relation) are common.

fn arb_mult() -> impl Strategy<Value = Mult> {
    prop_oneof![Just(Mult::Un), Just(Mult::Lin)]
}

fn base_type() -> BoxedStrategy<Type> {
    prop_oneof![
        Just(Type::Unit),
        Just(Type::Int),
        Just(Type::Dyn),
        Just(Type::end_out()),
        Just(Type::end_in()),
        Just(Type::dc()),
    ]
    .boxed()
}

fn base_session() -> BoxedStrategy<Session> {
    prop_oneof![Just(Session::EndOut), Just(Session::EndIn), Just(Session::DC)].boxed()
}

pub fn arb_type(d: usize) -> BoxedStrategy<Type> {
    if d <= 1 {
        return base_type();
    }
    prop_oneof![
        base_type(),
        (arb_mult(), arb_type(d - 1), arb_type(d - 1)).prop_map(|(m, t, u)| fun(m, t, u)),
        (arb_mult(), arb_type(d - 1), arb_type(d - 1)).prop_map(|(m, t, u)| prod(m, t, u)),
        arb_session(d).prop_map(Type::Sess),
    ]
    .boxed()
}

fn arb_branches(d: usize) -> BoxedStrategy<Branches> {
    (proptest::option::of(arb_session(d - 1)), proptest::option::of(arb_session(d - 1)))
        .prop_filter("non-empty", |(a, b)| a.is_some() || b.is_some())
        .prop_map(|(a, b)| {
            let mut m = BTreeMap::new();
            if let Some(a) = a {
                m.insert("a".to_string(), a);
            }
            if let Some(b) = b {
                m.insert("b".to_string(), b);
            }
            m
        })
        .boxed()
}

pub fn arb_session(d: usize) -> BoxedStrategy<Session> {
    if d <= 1 {
        return base_session();
    }
    prop_oneof![
        base_session(),
        (arb_type(d - 1), arb_session(d - 1)).prop_map(|(t, s)| send(t, s)),
        (arb_type(d - 1), arb_session(d - 1)).prop_map(|(t, s)| recv(t, s)),
        arb_branches(d).prop_map(Session::Select),
        arb_branches(d).prop_map(Session::Offer),
    ]
    .boxed()
}

pub fn arb_pair(d: usize) -> BoxedStrategy<(Type, Type)> {
    if d <= 1 {
        return (base_type(), base_type()).boxed();
    }
    prop_oneof![
        1 => (arb_type(d), arb_type(d)),
        1 => arb_type(d).prop_map(|t| (t, Type::Dyn)),
        1 => arb_type(d).prop_map(|t| (Type::Dyn, t)),
        2 => (arb_mult(), arb_mult(), arb_pair(d - 1), arb_pair(d - 1))
            .prop_map(|(m, n, (a, a2), (b, b2))| (fun(m, a, b), fun(n, a2, b2))),
        2 => (arb_mult(), arb_mult(), arb_pair(d - 1), arb_pair(d - 1))
            .prop_map(|(m, n, (a, a2), (b, b2))| (prod(m, a, b), prod(n, a2, b2))),
        3 => arb_session_pair(d).prop_map(|(s, r)| (Type::Sess(s), Type::Sess(r))),
    ]
    .boxed()
}

pub fn arb_session_pair(d: usize) -> BoxedStrategy<(Session, Session)> {
    if d <= 1 {
        return (base_session(), base_session()).boxed();
    }
    let choice = |sel: bool| {
        (arb_branches(d), arb_branches(d)).prop_map(move |(mut i, j)| {
            // share residuals on common labels half of the time
            for (l, r) in &j {
                if l == "a" {
                    i.insert(l.clone(), r.clone());
                }
            }
            if sel {
                (Session::Select(i), Session::Select(j))
            } else {
                (Session::Offer(i), Session::Offer(j))
            }
        })
    };
    prop_oneof![
        1 => (arb_session(d), arb_session(d)),
        1 => arb_session(d).prop_map(|s| (s, Session::DC)),
        1 => arb_session(d).prop_map(|s| (Session::DC, s)),
        2 => (arb_pair(d - 1), arb_session_pair(d - 1)).prop_map(|((t, t2), (s, s2))| (send(t, s), send(t2, s2))),
        2 => (arb_pair(d - 1), arb_session_pair(d - 1)).prop_map(|((t, t2), (s, s2))| (recv(t, s), recv(t2, s2))),
        1 => choice(true),
        1 => choice(false),
    ]
    .boxed()
}

// ---------------------------------------------------------------------------
// The example corpus.

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every runnable program in the corpus, sorted by name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ggv" | "ugv")))
        .collect();
    out.sort();
    out
}

pub fn is_untyped(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "ugv")
}

pub fn load(p: &Path) -> Loaded {
    let r = if is_untyped(p) { load_untyped(p) } else { load_typed(p) };
    r.unwrap_or_else(|e| panic!("{}: {}", p.display(), e))
}

/// `name -> expectation` from corpus/expected.txt.
pub fn expectations() -> BTreeMap<String, String> {
    let text = std::fs::read_to_string(corpus_dir().join("expected.txt")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (name, rest) = l.split_once("  ").unwrap();
            (name.to_string(), rest.trim().to_string())
        })
        .collect()
}
