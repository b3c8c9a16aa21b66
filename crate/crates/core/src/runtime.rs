//! Small-step simulator for the cast calculus.
//!
//! Each expression process is decomposed into an evaluation context and a
//! redex (see [`focus`]); a redex either steps locally, touches the
//! configuration (fork, new, cells), or is a communication primitive waiting
//! for its partner endpoint.  A scheduler picks one enabled process per step.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::blame::BlameLabel;
use crate::check::{tc_config, CheckError};
use crate::config::{Config, Proc};
use crate::relations::{sub, sub_sess};
use crate::term::{flv, partner, subst, Term};
use crate::types::{dual, ground_of, ground_session_of, is_ground, is_ground_session, prod, Mult, Session, Type};

/// A process that can make no sensible progress.  None of these arise from
/// well-typed programs.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("process {0} applies a value that is not an abstraction")]
    NotAFunction(u32),
    #[error("process {0} destructs a value that is not a pair")]
    NotAPair(u32),
    #[error("endpoint c{0} is the subject of two processes")]
    SameSubject(u32),
    #[error("endpoints c{0} and c{1} are both ready but do not agree")]
    Disagree(u32, u32),
    #[error("process {0} is stuck: {1}")]
    Malformed(u32, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stuck {
    Deadlock,
    OpenName(String),
    Error(RuntimeError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Quiescent { result: Option<Term> },
    /// `step` is the step that created the first blame process.
    Blamed { blames: Vec<Proc>, step: usize },
    Stuck(Stuck),
    StepLimit,
    /// Only with `typecheck_each_step`: a reachable configuration failed to
    /// typecheck, which indicates a bug in the checker or the rules.
    IllTyped { step: usize, error: CheckError },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepInfo {
    /// 1-based.
    pub index: usize,
    pub rule: &'static str,
    /// Processes that took part, by id.
    pub pids: Vec<u32>,
    pub blame: bool,
}

#[derive(Clone, Debug)]
pub enum Scheduler {
    RoundRobin { cursor: usize },
    Random(ChaCha8Rng),
}

impl Scheduler {
    pub fn round_robin() -> Self {
        Scheduler::RoundRobin { cursor: 0 }
    }

    pub fn seeded(seed: u64) -> Self {
        Scheduler::Random(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Choose among `enabled` process indices (sorted, non-empty).
    fn pick(&mut self, enabled: &[usize]) -> usize {
        match self {
            Scheduler::RoundRobin { cursor } => {
                let i = enabled.iter().copied().find(|i| *i >= *cursor).unwrap_or(enabled[0]);
                *cursor = i + 1;
                i
            }
            Scheduler::Random(rng) => *enabled.choose(rng).expect("non-empty"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_steps: usize,
    /// Keep going after blame and report every blame process at the end.
    pub run_to_quiescence: bool,
    pub typecheck_each_step: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_steps: 100_000, run_to_quiescence: false, typecheck_each_step: false }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub config: Config,
    pub steps: usize,
}

// ---------------------------------------------------------------------------
// Decomposition.

fn child(t: &Term, i: usize) -> &Term {
    match t {
        Term::App(a, b) | Term::Pair(_, a, b) | Term::Send(a, b) => {
            if i == 0 {
                a
            } else {
                b
            }
        }
        Term::LetPair(_, _, a, _)
        | Term::Receive(a)
        | Term::Select(_, a)
        | Term::Case(a, _)
        | Term::Close(a)
        | Term::Wait(a)
        | Term::If(a, _, _)
        | Term::Cast(a, ..) => a,
        Term::Arith(_, args) => &args[i],
        _ => unreachable!("term has no children"),
    }
}

fn child_mut(t: &mut Term, i: usize) -> &mut Term {
    match t {
        Term::App(a, b) | Term::Pair(_, a, b) | Term::Send(a, b) => {
            if i == 0 {
                a
            } else {
                b
            }
        }
        Term::LetPair(_, _, a, _)
        | Term::Receive(a)
        | Term::Select(_, a)
        | Term::Case(a, _)
        | Term::Close(a)
        | Term::Wait(a)
        | Term::If(a, _, _)
        | Term::Cast(a, ..) => a,
        Term::Arith(_, args) => &mut args[i],
        _ => unreachable!("term has no children"),
    }
}

pub fn subterm<'a>(t: &'a Term, path: &[usize]) -> &'a Term {
    path.iter().fold(t, |t, i| child(t, *i))
}

fn subterm_mut<'a>(t: &'a mut Term, path: &[usize]) -> &'a mut Term {
    path.iter().fold(t, |t, i| child_mut(t, *i))
}

/// `(v : G ⇒ Dyn) : Dyn ⇒ H`: collapse or collide takes priority over
/// allocating a cell for the inner cast.
fn collapse_pattern(body: &Term, from: &Type, to: &Type) -> bool {
    *from == Type::Dyn
        && is_ground(to)
        && matches!(body, Term::Cast(v, g, Type::Dyn, _) if v.is_value() && is_ground(g))
}

/// Split a non-value into `E[r]`, returning the path to `r`.
pub fn focus(t: &Term) -> Option<Vec<usize>> {
    if t.is_value() {
        return None;
    }
    let first = |ts: &[&Term]| ts.iter().position(|t| !t.is_value());
    let mut path = Vec::new();
    let mut cur = t;
    loop {
        let next = match cur {
            Term::App(a, b) | Term::Pair(_, a, b) | Term::Send(a, b) => first(&[a, b]),
            Term::LetPair(_, _, a, _)
            | Term::Receive(a)
            | Term::Select(_, a)
            | Term::Case(a, _)
            | Term::Close(a)
            | Term::Wait(a)
            | Term::If(a, _, _) => first(&[a]),
            Term::Cast(b, from, to, _) => {
                if collapse_pattern(b, from, to) {
                    None
                } else {
                    first(&[b])
                }
            }
            Term::Arith(_, args) => args.iter().position(|a| !a.is_value()),
            _ => None,
        };
        match next {
            Some(i) => {
                path.push(i);
                cur = child(cur, i);
            }
            None => return Some(path),
        }
    }
}

/// A communication primitive blocked on an endpoint.
#[derive(Clone, Debug)]
enum Prim {
    Send(Term),
    Recv,
    Select(String),
    Case(BTreeMap<String, (String, Term)>),
    Close,
    Wait,
    /// `c : DC ⇒p GS`
    Sync(Session, BlameLabel),
}

#[derive(Clone, Debug)]
enum Redex {
    Local(&'static str, Term),
    Fork(Term),
    New(Session),
    Alloc(Term, Type, BlameLabel),
    /// `a : Dyn ⇒q H`
    Read(u32, BlameLabel),
    Collide(&'static str, BlameLabel, BlameLabel),
    Prim(u32, Prim),
    Open(String),
    Fault(RuntimeError),
}

fn sess(t: &Type) -> Option<&Session> {
    t.as_session()
}

fn classify(pid: u32, r: &Term) -> Redex {
    let bad = |what: String| Redex::Fault(RuntimeError::Malformed(pid, what));
    match r {
        Term::Var(x) => Redex::Open(x.clone()),
        Term::App(f, a) => match &**f {
            Term::Lam(_, x, _, body) => Redex::Local("beta", subst(body, x, a)),
            Term::Cast(v, Type::Fn(_, t, u), Type::Fn(_, t2, u2), p) => {
                let arg = Term::Cast(a.clone(), (**t2).clone(), (**t).clone(), p.complement());
                let call = Term::App(v.clone(), Box::new(arg));
                Redex::Local("wrap", Term::Cast(Box::new(call), (**u).clone(), (**u2).clone(), *p))
            }
            _ => Redex::Fault(RuntimeError::NotAFunction(pid)),
        },
        Term::LetPair(x, y, b, body) => match &**b {
            Term::Pair(_, v, w) => {
                let e = if x == y { subst(body, y, w) } else { subst(&subst(body, x, v), y, w) };
                Redex::Local("let-pair", e)
            }
            _ => Redex::Fault(RuntimeError::NotAPair(pid)),
        },
        Term::Fork(b) => Redex::Fork((**b).clone()),
        Term::New(s) => Redex::New(s.clone()),
        Term::Send(v, c) => match &**c {
            Term::Chan(c) => Redex::Prim(*c, Prim::Send((**v).clone())),
            Term::Cast(w, from, to, p) => match (sess(from), sess(to)) {
                (Some(Session::Send(t, s)), Some(Session::Send(t2, s2))) => {
                    let payload = Term::Cast(v.clone(), (**t2).clone(), (**t).clone(), p.complement());
                    let sent = Term::Send(Box::new(payload), w.clone());
                    Redex::Local(
                        "send-cast",
                        Term::Cast(Box::new(sent), Type::Sess((**s).clone()), Type::Sess((**s2).clone()), *p),
                    )
                }
                _ => bad(format!("send on {}", c)),
            },
            _ => bad(format!("send on {}", c)),
        },
        Term::Receive(c) => match &**c {
            Term::Chan(c) => Redex::Prim(*c, Prim::Recv),
            Term::Cast(w, from, to, p) => match (sess(from), sess(to)) {
                (Some(Session::Recv(t, s)), Some(Session::Recv(t2, s2))) => Redex::Local(
                    "receive-cast",
                    Term::Cast(
                        Box::new(Term::Receive(w.clone())),
                        prod(Mult::Lin, (**t).clone(), Type::Sess((**s).clone())),
                        prod(Mult::Lin, (**t2).clone(), Type::Sess((**s2).clone())),
                        *p,
                    ),
                ),
                _ => bad(format!("receive on {}", c)),
            },
            _ => bad(format!("receive on {}", c)),
        },
        Term::Select(l, c) => match &**c {
            Term::Chan(c) => Redex::Prim(*c, Prim::Select(l.clone())),
            Term::Cast(w, from, to, p) => match (sess(from), sess(to)) {
                (Some(Session::Select(is)), Some(Session::Select(js))) if is.contains_key(l) && js.contains_key(l) => {
                    Redex::Local(
                        "select-cast",
                        Term::Cast(
                            Box::new(Term::Select(l.clone(), w.clone())),
                            Type::Sess(is[l].clone()),
                            Type::Sess(js[l].clone()),
                            *p,
                        ),
                    )
                }
                _ => bad(format!("select {} on {}", l, c)),
            },
            _ => bad(format!("select {} on {}", l, c)),
        },
        Term::Case(c, branches) => match &**c {
            Term::Chan(c) => Redex::Prim(*c, Prim::Case(branches.clone())),
            Term::Cast(w, from, to, p) => match (sess(from), sess(to)) {
                (Some(Session::Offer(is)), Some(Session::Offer(js)))
                    if is.keys().all(|l| js.contains_key(l) && branches.contains_key(l)) =>
                {
                    let mut out = BTreeMap::new();
                    for (l, ri) in is {
                        let (x, body) = &branches[l];
                        let si = Type::Sess(js[l].clone());
                        let coerce = Term::Cast(Box::new(Term::Var(x.clone())), Type::Sess(ri.clone()), si.clone(), *p);
                        let lam = Term::Lam(Mult::Lin, x.clone(), si, Box::new(body.clone()));
                        out.insert(l.clone(), (x.clone(), Term::App(Box::new(lam), Box::new(coerce))));
                    }
                    Redex::Local("case-cast", Term::Case(w.clone(), out))
                }
                _ => bad(format!("case on {}", c)),
            },
            _ => bad(format!("case on {}", c)),
        },
        Term::Close(c) | Term::Wait(c) => {
            let closing = matches!(r, Term::Close(_));
            let end = if closing { Type::end_out() } else { Type::end_in() };
            match &**c {
                Term::Chan(c) => Redex::Prim(*c, if closing { Prim::Close } else { Prim::Wait }),
                Term::Cast(w, from, to, _) if *from == end && *to == end => {
                    let e = if closing { Term::Close(w.clone()) } else { Term::Wait(w.clone()) };
                    Redex::Local(if closing { "close-cast" } else { "wait-cast" }, e)
                }
                _ => bad(format!("{} on {}", if closing { "close" } else { "wait" }, c)),
            }
        }
        Term::Arith(op, args) => {
            let ns: Option<Vec<i64>> =
                args.iter().map(|a| if let Term::Int(n) = a { Some(*n) } else { None }).collect();
            match ns {
                Some(ns) if ns.len() == op.arity() => Redex::Local("arith", Term::Int(op.eval(&ns))),
                _ => bad("arithmetic on a non-integer".into()),
            }
        }
        Term::If(c, t, e) => match &**c {
            Term::Int(n) => Redex::Local("if", if *n != 0 { (**t).clone() } else { (**e).clone() }),
            _ => bad("condition is not an integer".into()),
        },
        Term::Cast(v, from, to, p) => classify_cast(pid, v, from, to, *p),
        _ => bad(format!("{} is not a redex", r)),
    }
}

fn classify_cast(pid: u32, v: &Term, from: &Type, to: &Type, p: BlameLabel) -> Redex {
    let bad = || Redex::Fault(RuntimeError::Malformed(pid, format!("cast {} => {} of {}", from, to, v)));
    let dc = Type::dc();
    if from == to && matches!(from, Type::Dyn | Type::Unit | Type::Int) || (*from == dc && *to == dc) {
        return Redex::Local("cast-id", v.clone());
    }
    let twice = |mid: Type| {
        let inner = Term::Cast(Box::new(v.clone()), from.clone(), mid.clone(), p);
        Term::Cast(Box::new(inner), mid, to.clone(), p)
    };
    if *to == Type::Dyn {
        return match ground_of(from) {
            _ if is_ground(from) => Redex::Alloc(v.clone(), from.clone(), p),
            Some(g) => Redex::Local("factor-to-dyn", twice(g)),
            None => bad(),
        };
    }
    if *from == Type::Dyn {
        if is_ground(to) {
            return match v {
                Term::Cast(w, g, Type::Dyn, q) => {
                    if sub(g, to) {
                        Redex::Local("collapse", (**w).clone())
                    } else {
                        Redex::Collide("collide", q.complement(), p)
                    }
                }
                Term::Ref(r) => Redex::Read(*r, p),
                _ => bad(),
            };
        }
        return match ground_of(to) {
            Some(g) => Redex::Local("factor-from-dyn", twice(g)),
            None => bad(),
        };
    }
    match (from, to) {
        (Type::Sess(s), Type::Sess(Session::DC)) if !is_ground_session(s) => match ground_session_of(s) {
            Some(g) => Redex::Local("factor-to-dc", twice(Type::Sess(g))),
            None => bad(),
        },
        (Type::Sess(Session::DC), Type::Sess(r)) => {
            if is_ground_session(r) {
                match v {
                    Term::Cast(w, Type::Sess(g), _, q) => {
                        if sub_sess(g, r) {
                            Redex::Local("collapse-dc", (**w).clone())
                        } else {
                            Redex::Collide("collide-dc", q.complement(), p)
                        }
                    }
                    Term::Chan(c) => Redex::Prim(*c, Prim::Sync(r.clone(), p)),
                    _ => bad(),
                }
            } else {
                match ground_session_of(r) {
                    Some(g) => Redex::Local("factor-from-dc", twice(Type::Sess(g))),
                    None => bad(),
                }
            }
        }
        (Type::Prod(_, t1, t2), Type::Prod(n, u1, u2)) => match v {
            Term::Pair(_, a, b) => Redex::Local(
                "cast-pair",
                Term::Pair(
                    *n,
                    Box::new(Term::Cast(a.clone(), (**t1).clone(), (**u1).clone(), p)),
                    Box::new(Term::Cast(b.clone(), (**t2).clone(), (**u2).clone(), p)),
                ),
            ),
            _ => Redex::Fault(RuntimeError::NotAPair(pid)),
        },
        _ => bad(),
    }
}

// ---------------------------------------------------------------------------
// Process-level view.

#[derive(Clone, Debug)]
struct Ready {
    idx: usize,
    path: Vec<usize>,
    chan: u32,
    prim: Prim,
}

#[derive(Clone, Debug)]
enum Action {
    Single { idx: usize, path: Vec<usize>, redex: Redex },
    Pair(Ready, Ready),
}

fn agree(a: &Prim, b: &Prim) -> bool {
    match (a, b) {
        (Prim::Send(_), Prim::Recv) | (Prim::Recv, Prim::Send(_)) => true,
        (Prim::Select(l), Prim::Case(bs)) | (Prim::Case(bs), Prim::Select(l)) => bs.contains_key(l),
        (Prim::Close, Prim::Wait) | (Prim::Wait, Prim::Close) => true,
        (Prim::Sync(..), Prim::Sync(..)) => true,
        _ => false,
    }
}

/// Per-process view of a configuration: the redex of every expression
/// process, and the primitives blocked on each endpoint.
struct Survey {
    redexes: Vec<Option<(Vec<usize>, Redex)>>,
    ready: BTreeMap<u32, Vec<Ready>>,
}

fn survey(cfg: &Config) -> Survey {
    let mut redexes = Vec::new();
    let mut ready: BTreeMap<u32, Vec<Ready>> = BTreeMap::new();
    for (idx, p) in cfg.procs.iter().enumerate() {
        let found = match &p.body {
            Proc::Expr(t) => focus(t).map(|path| {
                let redex = classify(p.id, subterm(t, &path));
                (path, redex)
            }),
            _ => None,
        };
        if let Some((path, Redex::Prim(c, prim))) = &found {
            ready.entry(*c).or_default().push(Ready { idx, path: path.clone(), chan: *c, prim: prim.clone() });
        }
        redexes.push(found);
    }
    Survey { redexes, ready }
}

impl Survey {
    /// The action process `idx` would take if scheduled.
    fn action(&self, cfg: &Config, idx: usize) -> Option<Action> {
        let (path, redex) = self.redexes[idx].as_ref()?;
        match redex {
            Redex::Prim(c, _) => {
                let mine = self.ready[c].iter().find(|r| r.idx == idx)?;
                let theirs = self.ready.get(&partner(*c))?;
                if self.ready[c].len() != 1 || theirs.len() != 1 || !agree(&mine.prim, &theirs[0].prim) {
                    return None;
                }
                Some(Action::Pair(mine.clone(), theirs[0].clone()))
            }
            Redex::Open(_) | Redex::Fault(_) => None,
            Redex::Read(r, _) => {
                cfg.procs.iter().any(|p| p.body.cell_ref() == Some(*r)).then(|| Action::Single {
                    idx,
                    path: path.clone(),
                    redex: redex.clone(),
                })
            }
            _ => Some(Action::Single { idx, path: path.clone(), redex: redex.clone() }),
        }
    }

    fn enabled(&self, cfg: &Config) -> Vec<usize> {
        (0..cfg.procs.len()).filter(|i| self.action(cfg, *i).is_some()).collect()
    }
}

/// Report a run-time error in the configuration, if there is one: a bad
/// elimination, two processes acting on the same endpoint, or two ready
/// endpoints of one channel that do not agree.
pub fn detect_error(cfg: &Config) -> Option<RuntimeError> {
    let s = survey(cfg);
    for (_, r) in s.redexes.iter().flatten() {
        if let Redex::Fault(e) = r {
            return Some(e.clone());
        }
    }
    for (c, rs) in &s.ready {
        if rs.len() > 1 {
            return Some(RuntimeError::SameSubject(*c));
        }
    }
    for (c, rs) in &s.ready {
        if let Some(ds) = s.ready.get(&partner(*c)) {
            if *c < partner(*c) && !agree(&rs[0].prim, &ds[0].prim) {
                return Some(RuntimeError::Disagree(*c, partner(*c)));
            }
        }
    }
    None
}

/// Cells whose reference occurs nowhere else, in scan order.
pub fn gc_scan(cfg: &Config) -> Vec<usize> {
    let refs_outside = |skip: usize| -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for (i, p) in cfg.procs.iter().enumerate() {
            if i == skip {
                continue;
            }
            match &p.body {
                Proc::Expr(t) => out.extend(t.refs()),
                Proc::Cell { value, .. } => out.extend(value.refs()),
                _ => {}
            }
        }
        out
    };
    cfg.procs
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.body.cell_ref().filter(|r| !refs_outside(i).contains(r)).map(|_| i))
        .collect()
}

fn residual(s: &Session, label: Option<&str>) -> Session {
    match (s, label) {
        (Session::Send(_, r) | Session::Recv(_, r), _) => (**r).clone(),
        (Session::Select(bs) | Session::Offer(bs), Some(l)) => bs.get(l).cloned().unwrap_or(Session::DC),
        _ => Session::DC,
    }
}

/// The simulator state: a configuration, a scheduler and a step counter.
#[derive(Clone, Debug)]
pub struct Machine {
    pub config: Config,
    pub sched: Scheduler,
    pub steps: usize,
    pub first_blame: Option<usize>,
}

impl Machine {
    pub fn new(term: Term, sched: Scheduler) -> Self {
        Machine { config: Config::new(term), sched, steps: 0, first_blame: None }
    }

    /// Indices of processes that can step.
    pub fn enabled(&self) -> Vec<usize> {
        survey(&self.config).enabled(&self.config)
    }

    /// Take one step: a pending garbage collection if there is one,
    /// otherwise one scheduled process step.  `None` when nothing can move.
    pub fn step(&mut self) -> Option<StepInfo> {
        let (rule, pids) = match gc_scan(&self.config).first() {
            Some(&i) => self.collect(i),
            None => {
                let s = survey(&self.config);
                let enabled = s.enabled(&self.config);
                if enabled.is_empty() {
                    return None;
                }
                let idx = self.sched.pick(&enabled);
                let action = s.action(&self.config, idx).expect("enabled");
                self.apply(action)
            }
        };
        self.steps += 1;
        let blame = pids.iter().any(|id| {
            self.config.index_of(*id).is_some_and(|i| self.config.procs[i].body.is_blame())
        });
        if blame && self.first_blame.is_none() {
            self.first_blame = Some(self.steps);
        }
        self.config.prune();
        Some(StepInfo { index: self.steps, rule, pids, blame })
    }

    fn collect(&mut self, i: usize) -> (&'static str, Vec<u32>) {
        let cfg = &mut self.config;
        let id = cfg.procs[i].id;
        match cfg.procs[i].body.clone() {
            Proc::Cell { value, label, .. } => {
                cfg.procs[i].body = Proc::BlameGc { p: label.complement(), lin: flv(&value) };
                ("gc-full", vec![id])
            }
            _ => {
                cfg.procs.remove(i);
                ("gc-locked", vec![id])
            }
        }
    }

    fn expr_mut(&mut self, idx: usize) -> &mut Term {
        match &mut self.config.procs[idx].body {
            Proc::Expr(t) => t,
            _ => unreachable!("not an expression process"),
        }
    }

    fn blame_process(&mut self, idx: usize, p: BlameLabel, q: BlameLabel) {
        let lin = match &self.config.procs[idx].body {
            Proc::Expr(t) => flv(t),
            _ => BTreeSet::new(),
        };
        self.config.procs[idx].body = Proc::Blame { p, q, lin };
    }

    fn apply(&mut self, action: Action) -> (&'static str, Vec<u32>) {
        match action {
            Action::Single { idx, path, redex } => {
                let id = self.config.procs[idx].id;
                let rule = self.apply_single(idx, &path, redex);
                (rule, vec![id])
            }
            Action::Pair(a, b) => {
                let ids = vec![self.config.procs[a.idx].id, self.config.procs[b.idx].id];
                (self.apply_pair(a, b), ids)
            }
        }
    }

    fn apply_single(&mut self, idx: usize, path: &[usize], redex: Redex) -> &'static str {
        let put = |m: &mut Machine, t: Term| *subterm_mut(m.expr_mut(idx), path) = t;
        match redex {
            Redex::Local(rule, t) => {
                put(self, t);
                rule
            }
            Redex::Fork(body) => {
                put(self, Term::Unit);
                self.config.spawn(Proc::Expr(body));
                "fork"
            }
            Redex::New(s) => {
                let k = self.config.next_pair;
                self.config.next_pair += 1;
                self.config.chans.insert(k, s);
                put(self, Term::Pair(Mult::Lin, Box::new(Term::Chan(2 * k)), Box::new(Term::Chan(2 * k + 1))));
                "new"
            }
            Redex::Alloc(value, ground, label) => {
                let r = self.config.next_ref;
                self.config.next_ref += 1;
                put(self, Term::Ref(r));
                self.config.spawn(Proc::Cell { r, value, ground, label });
                "cell-alloc"
            }
            Redex::Read(r, q) => {
                let cell = self.config.procs.iter().position(|p| p.body.cell_ref() == Some(r)).expect("cell exists");
                match self.config.procs[cell].body.clone() {
                    Proc::Cell { value, ground, label, .. } => {
                        self.config.procs[cell].body = Proc::Locked { r, label };
                        let mut inner = path.to_vec();
                        inner.push(0);
                        *subterm_mut(self.expr_mut(idx), &inner) =
                            Term::Cast(Box::new(value), ground, Type::Dyn, label);
                        "cell-read"
                    }
                    Proc::Locked { label, .. } => {
                        self.blame_process(idx, label.complement(), q);
                        "cell-locked"
                    }
                    _ => unreachable!("cell_ref only matches cells"),
                }
            }
            Redex::Collide(rule, p, q) => {
                self.blame_process(idx, p, q);
                rule
            }
            Redex::Prim(..) | Redex::Open(_) | Redex::Fault(_) => unreachable!("not a single-process action"),
        }
    }

    fn apply_pair(&mut self, a: Ready, b: Ready) -> &'static str {
        // orient so that `a` is the acting side of the rule
        let (a, b) = match (&a.prim, &b.prim) {
            (Prim::Recv, _) | (Prim::Case(_), _) | (Prim::Wait, _) => (b, a),
            (Prim::Sync(..), _) if a.chan > b.chan => (b, a),
            _ => (a, b),
        };
        let k = a.chan / 2;
        let even = |r: &Ready| r.chan % 2 == 0;
        let put = |m: &mut Machine, r: &Ready, t: Term| *subterm_mut(m.expr_mut(r.idx), &r.path) = t;
        match (a.prim.clone(), b.prim.clone()) {
            (Prim::Send(v), Prim::Recv) => {
                put(self, &a, Term::Chan(a.chan));
                put(self, &b, Term::Pair(Mult::Lin, Box::new(v), Box::new(Term::Chan(b.chan))));
                self.advance(k, None);
                "comm"
            }
            (Prim::Select(l), Prim::Case(bs)) => {
                put(self, &a, Term::Chan(a.chan));
                let (x, body) = &bs[&l];
                put(self, &b, subst(body, x, &Term::Chan(b.chan)));
                self.advance(k, Some(&l));
                "choice"
            }
            (Prim::Close, Prim::Wait) => {
                put(self, &a, Term::Unit);
                put(self, &b, Term::Unit);
                self.config.chans.remove(&k);
                "close"
            }
            (Prim::Sync(gs, p), Prim::Sync(gr, q)) => {
                if sub_sess(&dual(&gs), &gr) {
                    put(self, &a, Term::Chan(a.chan));
                    put(self, &b, Term::Chan(b.chan));
                    let s = if even(&a) { gs } else { gr };
                    self.config.chans.insert(k, s);
                    "sync"
                } else {
                    let lin: BTreeSet<u32> = [a.idx, b.idx]
                        .iter()
                        .flat_map(|i| match &self.config.procs[*i].body {
                            Proc::Expr(t) => flv(t),
                            _ => BTreeSet::new(),
                        })
                        .chain([a.chan, b.chan])
                        .collect();
                    let (keep, drop) = (a.idx.min(b.idx), a.idx.max(b.idx));
                    self.config.procs[keep].body = Proc::Blame { p, q, lin };
                    self.config.procs.remove(drop);
                    "sync-blame"
                }
            }
            _ => unreachable!("partners agree"),
        }
    }

    fn advance(&mut self, k: u32, label: Option<&str>) {
        if let Some(s) = self.config.chans.get(&k) {
            let next = residual(s, label);
            self.config.chans.insert(k, next);
        }
    }

    /// Classify a configuration in which nothing is enabled.
    pub fn terminal_outcome(&self) -> Outcome {
        let cfg = &self.config;
        if let Some(step) = self.first_blame {
            return Outcome::Blamed { blames: cfg.blames().into_iter().cloned().collect(), step };
        }
        if cfg.all_values() {
            return Outcome::Quiescent { result: cfg.result.clone() };
        }
        if let Some(e) = detect_error(cfg) {
            return Outcome::Stuck(Stuck::Error(e));
        }
        for (_, r) in survey(cfg).redexes.iter().flatten() {
            if let Redex::Open(x) = r {
                return Outcome::Stuck(Stuck::OpenName(x.clone()));
            }
        }
        Outcome::Stuck(Stuck::Deadlock)
    }
}

/// Run `term` from `⟨term⟩`, calling `observe` after every step.
pub fn run_with(
    term: Term,
    sched: Scheduler,
    opts: &RunOptions,
    mut observe: impl FnMut(&StepInfo, &Config),
) -> RunResult {
    let mut m = Machine::new(term, sched);
    let outcome = loop {
        if m.steps >= opts.max_steps {
            break Outcome::StepLimit;
        }
        let Some(info) = m.step() else { break m.terminal_outcome() };
        observe(&info, &m.config);
        if opts.typecheck_each_step {
            if let Err(error) = tc_config(&m.config) {
                break Outcome::IllTyped { step: info.index, error };
            }
        }
        if info.blame && !opts.run_to_quiescence {
            break m.terminal_outcome();
        }
    };
    RunResult { outcome, steps: m.steps, config: m.config }
}

pub fn run(term: Term, sched: Scheduler, opts: &RunOptions) -> RunResult {
    run_with(term, sched, opts, |_, _| {})
}
