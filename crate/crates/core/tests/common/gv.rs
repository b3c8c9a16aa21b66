//! A declarative GV checker, written from the typing rules rather than the
//! algorithm: it computes the set of every type derivable for a term (with
//! subsumption) inside a finite candidate universe, and splits contexts by
//! free variables.  Also a generator of random static programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ggv_core::ast::{ArithOp, Expr, ExprKind};
use ggv_core::parser::parse_program;
use ggv_core::relations::sub;
use ggv_core::typer::{tcexp, TypeEnv};
use ggv_core::types::{dual, fun, prod, Mult, Session, Type};

type Ctx = BTreeMap<String, Type>;
type Types = Rc<BTreeSet<Type>>;

fn lin(t: &Type) -> bool {
    match t {
        Type::Sess(_) => true,
        Type::Fn(m, ..) | Type::Prod(m, ..) => *m == Mult::Lin,
        _ => false,
    }
}

fn fv(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let minus = |s: BTreeSet<String>, xs: &[&String]| s.into_iter().filter(|v| !xs.contains(&v)).collect::<BTreeSet<_>>();
    match &e.kind {
        ExprKind::Var(x) => {
            out.insert(x.clone());
        }
        ExprKind::Unit | ExprKind::Int(_) | ExprKind::New(_) => {}
        ExprKind::Lam(_, x, _, b) => out = minus(fv(b), &[x]),
        ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::Send(a, b) => {
            out = fv(a);
            out.extend(fv(b));
        }
        ExprKind::LetPair(x, y, a, b) => {
            out = fv(a);
            out.extend(minus(fv(b), &[x, y]));
        }
        ExprKind::Fork(a) | ExprKind::Receive(a) | ExprKind::Select(_, a) | ExprKind::Close(a) | ExprKind::Wait(a) => {
            out = fv(a)
        }
        ExprKind::Case(s, bs) => {
            out = fv(s);
            for (x, b) in bs.values() {
                out.extend(minus(fv(b), &[x]));
            }
        }
        ExprKind::Arith(_, args) => args.iter().for_each(|a| out.extend(fv(a))),
        ExprKind::If(c, t, f) => {
            out = fv(c);
            out.extend(fv(t));
            out.extend(fv(f));
        }
    }
    out
}

fn restrict(g: &Ctx, vars: &BTreeSet<String>) -> Option<Ctx> {
    let mut out = Ctx::new();
    for x in vars {
        out.insert(x.clone(), g.get(x)?.clone());
    }
    Some(out)
}

/// Split `g` between two parts with free variables `a` and `b`; a linear
/// variable may go to one side only.
fn split(g: &Ctx, a: &BTreeSet<String>, b: &BTreeSet<String>) -> Option<(Ctx, Ctx)> {
    if a.intersection(b).any(|x| g.get(x).is_some_and(lin)) {
        return None;
    }
    Some((restrict(g, a)?, restrict(g, b)?))
}

struct Oracle {
    candidates: Vec<Type>,
    memo: HashMap<(usize, Ctx), Types>,
}

impl Oracle {
    fn new(e: &Expr, extra: &[Type]) -> Self {
        let mut set = BTreeSet::new();
        let base = [Type::Unit, Type::Int, Type::end_out(), Type::end_in()];
        for t in &base {
            close_under_subterms(t, &mut set);
        }
        for m in [Mult::Un, Mult::Lin] {
            for a in &base {
                for b in &base {
                    set.insert(fun(m, a.clone(), b.clone()));
                    set.insert(prod(m, a.clone(), b.clone()));
                }
            }
        }
        let mut anns = Vec::new();
        annotations(e, &mut anns);
        anns.extend(extra.iter().cloned());
        for t in &anns {
            close_under_subterms(t, &mut set);
        }
        Oracle { candidates: set.into_iter().collect(), memo: HashMap::new() }
    }

    /// The given types plus every candidate above one of them.
    fn up(&self, mins: impl IntoIterator<Item = Type>) -> Types {
        let mins: Vec<Type> = mins.into_iter().collect();
        let mut out: BTreeSet<Type> = mins.iter().cloned().collect();
        for c in &self.candidates {
            if mins.iter().any(|m| sub(m, c)) {
                out.insert(c.clone());
            }
        }
        Rc::new(out)
    }

    fn bind(&mut self, g: &Ctx, binds: &[(&String, &Type)], body: &Expr) -> Types {
        let fvb = fv(body);
        let mut g = g.clone();
        for (x, t) in binds {
            if lin(t) && !fvb.contains(*x) {
                return Rc::default();
            }
            g.insert((*x).clone(), (*t).clone());
        }
        match restrict(&g, &fvb) {
            Some(g) => self.derive(&g, body),
            None => Rc::default(),
        }
    }

    fn derive(&mut self, g: &Ctx, e: &Expr) -> Types {
        let key = (e as *const Expr as usize, g.clone());
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let r = self.rule(g, e);
        self.memo.insert(key, r.clone());
        r
    }

    fn rule(&mut self, g: &Ctx, e: &Expr) -> Types {
        let none = Rc::<BTreeSet<Type>>::default;
        match &e.kind {
            ExprKind::Var(x) => self.up(g.get(x).cloned()),
            ExprKind::Unit => self.up([Type::Unit]),
            ExprKind::Int(_) => self.up([Type::Int]),
            ExprKind::New(s) => self.up([prod(Mult::Lin, Type::Sess(s.clone()), Type::Sess(dual(s)))]),
            ExprKind::Lam(m, x, t, b) => {
                if *m == Mult::Un && g.values().any(lin) {
                    return none();
                }
                let bodies = self.bind(g, &[(x, t)], b);
                self.up(bodies.iter().map(|u| fun(*m, t.clone(), u.clone())))
            }
            ExprKind::App(f, a) => {
                let Some((g1, g2)) = split(g, &fv(f), &fv(a)) else { return none() };
                let (fs, args) = (self.derive(&g1, f), self.derive(&g2, a));
                let mut out = Vec::new();
                for ft in fs.iter() {
                    if let Type::Fn(_, dom, cod) = ft {
                        if args.iter().any(|t| sub(t, dom)) {
                            out.push((**cod).clone());
                        }
                    }
                }
                self.up(out)
            }
            ExprKind::Pair(m, a, b) => {
                let Some((g1, g2)) = split(g, &fv(a), &fv(b)) else { return none() };
                let (l, r) = (self.derive(&g1, a), self.derive(&g2, b));
                let mut out = Vec::new();
                for t in l.iter() {
                    for u in r.iter() {
                        if *m == Mult::Lin || (!lin(t) && !lin(u)) {
                            out.push(prod(*m, t.clone(), u.clone()));
                        }
                    }
                }
                self.up(out)
            }
            ExprKind::LetPair(x, y, a, b) => {
                if x == y {
                    return none();
                }
                let body_fv: BTreeSet<String> = fv(b).into_iter().filter(|v| v != x && v != y).collect();
                let Some((g1, g2)) = split(g, &fv(a), &body_fv) else { return none() };
                let pairs = self.derive(&g1, a);
                let mut out = BTreeSet::new();
                for p in pairs.iter() {
                    if let Type::Prod(_, t, u) = p {
                        out.extend(self.bind(&g2, &[(x, t), (y, u)], b).iter().cloned());
                    }
                }
                Rc::new(out)
            }
            ExprKind::Fork(a) => {
                if self.derive(g, a).contains(&Type::Unit) {
                    self.up([Type::Unit])
                } else {
                    none()
                }
            }
            ExprKind::Send(v, c) => {
                let Some((g1, g2)) = split(g, &fv(v), &fv(c)) else { return none() };
                let (vs, cs) = (self.derive(&g1, v), self.derive(&g2, c));
                let mut out = Vec::new();
                for ct in cs.iter() {
                    if let Type::Sess(Session::Send(t, s)) = ct {
                        if vs.iter().any(|u| sub(u, t)) {
                            out.push(Type::Sess((**s).clone()));
                        }
                    }
                }
                self.up(out)
            }
            ExprKind::Receive(c) => {
                let cs = self.derive(g, c);
                self.up(cs.iter().filter_map(|ct| match ct {
                    Type::Sess(Session::Recv(t, s)) => Some(prod(Mult::Lin, (**t).clone(), Type::Sess((**s).clone()))),
                    _ => None,
                }))
            }
            ExprKind::Select(l, c) => {
                let cs = self.derive(g, c);
                self.up(cs.iter().filter_map(|ct| match ct {
                    Type::Sess(Session::Select(bs)) => bs.get(l).cloned().map(Type::Sess),
                    _ => None,
                }))
            }
            ExprKind::Close(c) | ExprKind::Wait(c) => {
                let want = if matches!(e.kind, ExprKind::Close(_)) { Type::end_out() } else { Type::end_in() };
                if self.derive(g, c).contains(&want) {
                    self.up([Type::Unit])
                } else {
                    none()
                }
            }
            ExprKind::Arith(op, args) => {
                if args.len() != op.arity() {
                    return none();
                }
                let parts: Vec<BTreeSet<String>> = args.iter().map(fv).collect();
                let mut ok = true;
                for (i, p) in parts.iter().enumerate() {
                    for q in &parts[i + 1..] {
                        ok &= split(g, p, q).is_some();
                    }
                }
                for (a, p) in args.iter().zip(&parts) {
                    ok &= match restrict(g, p) {
                        Some(gi) => self.derive(&gi, a).contains(&Type::Int),
                        None => false,
                    };
                }
                if ok {
                    self.up([Type::Int])
                } else {
                    none()
                }
            }
            ExprKind::If(c, t, f) => {
                let mut arms = fv(t);
                arms.extend(fv(f));
                let Some((g1, g2)) = split(g, &fv(c), &arms) else { return none() };
                if !self.derive(&g1, c).contains(&Type::Int) {
                    return none();
                }
                let mut sets = Vec::new();
                for arm in [t, f] {
                    // both arms consume the whole context
                    if g2.iter().any(|(x, ty)| lin(ty) && !fv(arm).contains(x)) {
                        return none();
                    }
                    let ga = restrict(&g2, &fv(arm)).unwrap();
                    sets.push(self.derive(&ga, arm));
                }
                Rc::new(sets[0].intersection(&sets[1]).cloned().collect())
            }
            ExprKind::Case(s, bs) => {
                let mut arms = BTreeSet::new();
                for (x, b) in bs.values() {
                    arms.extend(fv(b).into_iter().filter(|v| v != x));
                }
                let Some((g1, g2)) = split(g, &fv(s), &arms) else { return none() };
                let scrut = self.derive(&g1, s);
                let labels: BTreeSet<&String> = bs.keys().collect();
                let sessions: Vec<Session> =
                    self.candidates.iter().filter_map(|t| t.as_session().cloned()).collect();
                let mut out = BTreeSet::new();
                for st in scrut.iter() {
                    let Type::Sess(Session::Offer(offer)) = st else { continue };
                    if !offer.keys().all(|l| labels.contains(l)) {
                        continue;
                    }
                    // a branch the channel does not offer may assume any session
                    let mut common: Option<BTreeSet<Type>> = None;
                    for (l, (x, b)) in bs {
                        if g2.iter().any(|(v, ty)| lin(ty) && v != x && !fv(b).contains(v)) {
                            common = Some(BTreeSet::new());
                            break;
                        }
                        let assumptions: Vec<Session> = match offer.get(l) {
                            Some(r) => vec![r.clone()],
                            None => sessions.clone(),
                        };
                        let mut here = BTreeSet::new();
                        for r in assumptions {
                            let t = Type::Sess(r);
                            here.extend(self.bind(&g2, &[(x, &t)], b).iter().cloned());
                        }
                        common = Some(match common {
                            None => here,
                            Some(c) => c.intersection(&here).cloned().collect(),
                        });
                    }
                    out.extend(common.unwrap_or_default());
                }
                Rc::new(out)
            }
        }
    }
}

fn close_under_subterms(t: &Type, set: &mut BTreeSet<Type>) {
    if !set.insert(t.clone()) {
        return;
    }
    match t {
        Type::Fn(m, a, b) | Type::Prod(m, a, b) => {
            close_under_subterms(a, set);
            close_under_subterms(b, set);
            let flip = if *m == Mult::Un { Mult::Lin } else { Mult::Un };
            let other = match t {
                Type::Fn(..) => fun(flip, (**a).clone(), (**b).clone()),
                _ => prod(flip, (**a).clone(), (**b).clone()),
            };
            set.insert(other);
        }
        Type::Sess(s) => {
            set.insert(Type::Sess(dual(s)));
            match s {
                Session::Send(a, r) | Session::Recv(a, r) => {
                    close_under_subterms(a, set);
                    close_under_subterms(&Type::Sess((**r).clone()), set);
                }
                Session::Select(bs) | Session::Offer(bs) => {
                    for r in bs.values() {
                        close_under_subterms(&Type::Sess(r.clone()), set);
                    }
                }
                _ => {}
            }
        }
        _ => {}
    }
}

fn annotations(e: &Expr, out: &mut Vec<Type>) {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::Unit | ExprKind::Int(_) => {}
        ExprKind::New(s) => out.push(Type::Sess(s.clone())),
        ExprKind::Lam(_, _, t, b) => {
            out.push(t.clone());
            annotations(b, out);
        }
        ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::LetPair(_, _, a, b) | ExprKind::Send(a, b) => {
            annotations(a, out);
            annotations(b, out);
        }
        ExprKind::Fork(a) | ExprKind::Receive(a) | ExprKind::Select(_, a) | ExprKind::Close(a) | ExprKind::Wait(a) => {
            annotations(a, out)
        }
        ExprKind::Case(s, bs) => {
            annotations(s, out);
            bs.values().for_each(|(_, b)| annotations(b, out));
        }
        ExprKind::Arith(_, args) => args.iter().for_each(|a| annotations(a, out)),
        ExprKind::If(c, t, f) => {
            annotations(c, out);
            annotations(t, out);
            annotations(f, out);
        }
    }
}

/// Compare the two checkers on a closed static term.
pub fn agree(e: &Expr) -> Result<Option<Type>, String> {
    assert!(e.is_static());
    let algo = tcexp(&TypeEnv::new(), e).map(|(t, _)| t);
    let extra: Vec<Type> = algo.iter().cloned().collect();
    let mut oracle = Oracle::new(e, &extra);
    let derivable = oracle.derive(&Ctx::new(), e);
    match algo {
        Ok(t) => {
            if !derivable.contains(&t) {
                return Err(format!("algorithmic type {} is not derivable", t));
            }
            if let Some(u) = derivable.iter().find(|u| !sub(&t, u)) {
                return Err(format!("derivable {} is not a supertype of {}", u, t));
            }
            Ok(Some(t))
        }
        Err(err) if derivable.is_empty() => {
            let _ = err;
            Ok(None)
        }
        Err(err) => Err(format!("rejected ({}) but derivable at {}", err, derivable.iter().next().unwrap())),
    }
}
// --- random programs -----------------------------------------------------
//
// A type-directed generator builds well-typed static programs: it opens
// channels, then consumes every linear variable with a protocol action or by
// handing a subset of them to a forked thread.  A third of the programs are
// then mutated, which usually breaks them, so both verdicts get exercised.

pub struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
}

fn var(x: &str) -> Expr {
    Expr::bare(ExprKind::Var(x.to_string()))
}

fn seq(first: Expr, rest: Expr) -> Expr {
    let lam = Expr::bare(ExprKind::Lam(Mult::Lin, "_".into(), Type::Unit, Box::new(rest)));
    Expr::bare(ExprKind::App(Box::new(lam), Box::new(first)))
}

fn let_(x: &str, t: Type, bound: Expr, body: Expr) -> Expr {
    let lam = Expr::bare(ExprKind::Lam(Mult::Lin, x.to_string(), t, Box::new(body)));
    Expr::bare(ExprKind::App(Box::new(lam), Box::new(bound)))
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), fresh: 0 }
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{}{}", base, self.fresh)
    }

    fn int_fn() -> Type {
        fun(Mult::Un, Type::Int, Type::Int)
    }

    /// A closed-over-linear-free expression of type `t`, using the
    /// unrestricted variables `un`.
    fn pure(&mut self, t: &Type, un: &[(String, Type)], fuel: u32) -> Expr {
        let vars: Vec<&String> = un.iter().filter(|(_, u)| u == t).map(|(x, _)| x).collect();
        if !vars.is_empty() && self.rng.gen_bool(0.4) {
            return var(vars[self.rng.gen_range(0..vars.len())]);
        }
        let small = fuel == 0;
        match t {
            Type::Int => match if small { 0 } else { self.rng.gen_range(0..5) } {
                0 => Expr::bare(ExprKind::Int(self.rng.gen_range(0..5))),
                1 => Expr::bare(ExprKind::Arith(
                    ArithOp::Add,
                    vec![self.pure(t, un, fuel - 1), self.pure(t, un, fuel - 1)],
                )),
                2 => Expr::bare(ExprKind::App(
                    Box::new(self.pure(&Self::int_fn(), un, fuel - 1)),
                    Box::new(self.pure(t, un, fuel - 1)),
                )),
                3 => Expr::bare(ExprKind::If(
                    Box::new(self.pure(t, un, fuel - 1)),
                    Box::new(self.pure(t, un, fuel - 1)),
                    Box::new(self.pure(t, un, fuel - 1)),
                )),
                _ => {
                    let x = self.name("n");
                    let p = Expr::bare(ExprKind::Pair(
                        Mult::Un,
                        Box::new(self.pure(t, un, fuel - 1)),
                        Box::new(self.pure(t, un, fuel - 1)),
                    ));
                    let y = self.name("m");
                    let mut un2 = un.to_vec();
                    un2.push((x.clone(), Type::Int));
                    un2.push((y.clone(), Type::Int));
                    let body = self.pure(t, &un2, fuel - 1);
                    Expr::bare(ExprKind::LetPair(x, y, Box::new(p), Box::new(body)))
                }
            },
            Type::Fn(m, a, b) => {
                let x = self.name("x");
                let mut un2 = un.to_vec();
                un2.push((x.clone(), (**a).clone()));
                let body = self.pure(b, &un2, fuel.saturating_sub(1));
                Expr::bare(ExprKind::Lam(*m, x, (**a).clone(), Box::new(body)))
            }
            _ => Expr::bare(ExprKind::Unit),
        }
    }

    /// An expression of type `t` that consumes exactly the linear variables
    /// in `lin`.
    pub fn gen(&mut self, t: &Type, mut lin: Vec<(String, Type)>, un: &[(String, Type)], fuel: u32) -> Expr {
        if lin.is_empty() {
            if fuel > 0 && self.rng.gen_bool(0.5) {
                return self.open(t, lin, un, fuel);
            }
            return self.pure(t, un, fuel.min(2));
        }
        if lin.len() == 1 && lin[0].1 == *t {
            return var(&lin[0].0);
        }
        if fuel > 0 && lin.len() > 1 && self.rng.gen_bool(0.3) {
            // hand a share of the channels to a new thread
            let k = self.rng.gen_range(1..lin.len());
            let rest = lin.split_off(k);
            let child = self.gen(&Type::Unit, lin, un, fuel - 1);
            let fork = Expr::bare(ExprKind::Fork(Box::new(child)));
            return seq(fork, self.gen(t, rest, un, fuel - 1));
        }
        if fuel > 0 && lin.len() < 4 && self.rng.gen_bool(0.2) {
            return self.open(t, lin, un, fuel);
        }
        let i = self.rng.gen_range(0..lin.len());
        let (v, vt) = lin.remove(i);
        let fuel = fuel.saturating_sub(1);
        match vt.as_session() {
            Some(Session::EndOut) => seq(Expr::bare(ExprKind::Close(Box::new(var(&v)))), self.gen(t, lin, un, fuel)),
            Some(Session::EndIn) => seq(Expr::bare(ExprKind::Wait(Box::new(var(&v)))), self.gen(t, lin, un, fuel)),
            Some(Session::Send(_, s)) => {
                let v2 = self.name("c");
                let payload = self.pure(&Type::Int, un, 1);
                let sent = Expr::bare(ExprKind::Send(Box::new(payload), Box::new(var(&v))));
                let st = Type::Sess((**s).clone());
                lin.push((v2.clone(), st.clone()));
                let body = self.gen(t, lin, un, fuel);
                let_(&v2, st, sent, body)
            }
            Some(Session::Recv(_, s)) => {
                let (x, v2) = (self.name("x"), self.name("c"));
                let mut un2 = un.to_vec();
                un2.push((x.clone(), Type::Int));
                lin.push((v2.clone(), Type::Sess((**s).clone())));
                let body = self.gen(t, lin, &un2, fuel);
                let recv = Expr::bare(ExprKind::Receive(Box::new(var(&v))));
                Expr::bare(ExprKind::LetPair(x, v2, Box::new(recv), Box::new(body)))
            }
            Some(Session::Select(bs)) => {
                let (l, s) = bs.iter().next().unwrap();
                let v2 = self.name("c");
                let st = Type::Sess(s.clone());
                lin.push((v2.clone(), st.clone()));
                let body = self.gen(t, lin, un, fuel);
                let_(&v2, st, Expr::bare(ExprKind::Select(l.clone(), Box::new(var(&v)))), body)
            }
            Some(Session::Offer(bs)) => {
                let mut arms = BTreeMap::new();
                for (l, s) in bs {
                    let x = self.name("c");
                    let mut lin2 = lin.clone();
                    lin2.push((x.clone(), Type::Sess(s.clone())));
                    arms.insert(l.clone(), (x, self.gen(t, lin2, un, fuel)));
                }
                Expr::bare(ExprKind::Case(Box::new(var(&v)), arms))
            }
            _ => {
                // a linear function of unit
                let app = Expr::bare(ExprKind::App(Box::new(var(&v)), Box::new(Expr::bare(ExprKind::Unit))));
                seq(app, self.gen(t, lin, un, fuel))
            }
        }
    }

    /// Open a fresh channel and continue with both endpoints.
    fn open(&mut self, t: &Type, mut lin: Vec<(String, Type)>, un: &[(String, Type)], fuel: u32) -> Expr {
        let protocols = [
            Session::EndOut,
            ggv_core::types::send(Type::Int, Session::EndOut),
            ggv_core::types::recv(Type::Int, ggv_core::types::send(Type::Int, Session::EndIn)),
            ggv_core::types::select([("a", Session::EndOut), ("b", ggv_core::types::send(Type::Int, Session::EndOut))]),
        ];
        let s = protocols[self.rng.gen_range(0..protocols.len())].clone();
        let (c, d) = (self.name("c"), self.name("d"));
        lin.push((c.clone(), Type::Sess(s.clone())));
        lin.push((d.clone(), Type::Sess(dual(&s))));
        let body = self.gen(t, lin, un, fuel - 1);
        Expr::bare(ExprKind::LetPair(c, d, Box::new(Expr::bare(ExprKind::New(s))), Box::new(body)))
    }

    pub fn mutate(&mut self, e: &mut Expr) {
        let mut nodes = Vec::new();
        collect(e, &mut nodes);
        let target = nodes[self.rng.gen_range(0..nodes.len())];
        let mut k = 0;
        let choice = self.rng.gen_range(0..4);
        mutate_at(e, target, &mut k, choice);
    }
}

fn collect(e: &Expr, out: &mut Vec<usize>) {
    out.push(out.len());
    each_child(e, &mut |c| collect(c, out));
}

fn each_child(e: &Expr, f: &mut impl FnMut(&Expr)) {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::Unit | ExprKind::Int(_) | ExprKind::New(_) => {}
        ExprKind::Lam(_, _, _, b)
        | ExprKind::Fork(b)
        | ExprKind::Receive(b)
        | ExprKind::Select(_, b)
        | ExprKind::Close(b)
        | ExprKind::Wait(b) => f(b),
        ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::LetPair(_, _, a, b) | ExprKind::Send(a, b) => {
            f(a);
            f(b)
        }
        ExprKind::Case(s, bs) => {
            f(s);
            bs.values().for_each(|(_, b)| f(b));
        }
        ExprKind::Arith(_, args) => args.iter().for_each(f),
        ExprKind::If(c, t, e) => {
            f(c);
            f(t);
            f(e)
        }
    }
}

fn mutate_at(e: &mut Expr, target: usize, k: &mut usize, choice: u32) {
    if *k == target {
        *k += 1;
        e.kind = match (std::mem::replace(&mut e.kind, ExprKind::Unit), choice) {
            (ExprKind::Lam(m, x, t, b), 0) => {
                let m = if m == Mult::Un { Mult::Lin } else { Mult::Un };
                ExprKind::Lam(m, x, t, b)
            }
            (ExprKind::Lam(m, x, _, b), 1) => ExprKind::Lam(m, x, Type::Int, b),
            (ExprKind::Close(c), _) => ExprKind::Wait(c),
            (ExprKind::Wait(c), _) => ExprKind::Close(c),
            (ExprKind::Pair(_, a, b), _) => ExprKind::Pair(Mult::Un, a, b),
            (ExprKind::New(s), _) => ExprKind::New(dual(&s)),
            (ExprKind::Var(_), 2) => ExprKind::Unit,
            (kind, 3) => {
                // use the subterm twice
                let dup = Expr::bare(kind);
                ExprKind::Pair(Mult::Lin, Box::new(dup.clone()), Box::new(dup))
            }
            (_, _) => ExprKind::Int(0),
        };
        return;
    }
    *k += 1;
    match &mut e.kind {
        ExprKind::Var(_) | ExprKind::Unit | ExprKind::Int(_) | ExprKind::New(_) => {}
        ExprKind::Lam(_, _, _, b)
        | ExprKind::Fork(b)
        | ExprKind::Receive(b)
        | ExprKind::Select(_, b)
        | ExprKind::Close(b)
        | ExprKind::Wait(b) => mutate_at(b, target, k, choice),
        ExprKind::App(a, b) | ExprKind::Pair(_, a, b) | ExprKind::LetPair(_, _, a, b) | ExprKind::Send(a, b) => {
            mutate_at(a, target, k, choice);
            mutate_at(b, target, k, choice);
        }
        ExprKind::Case(s, bs) => {
            mutate_at(s, target, k, choice);
            bs.values_mut().for_each(|(_, b)| mutate_at(b, target, k, choice));
        }
        ExprKind::Arith(_, args) => args.iter_mut().for_each(|a| mutate_at(a, target, k, choice)),
        ExprKind::If(c, t, f) => {
            mutate_at(c, target, k, choice);
            mutate_at(t, target, k, choice);
            mutate_at(f, target, k, choice);
        }
    }
}

/// Generate `n` programs from `seed`, mutating every third one, and compare
/// the two checkers on each.  Returns the (accepted, rejected) counts.
pub fn random_agreement(seed: u64, n: usize) -> Result<(usize, usize), String> {
    let mut g = Gen::new(seed);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..n {
        let t = [Type::Unit, Type::Int][i % 2].clone();
        let mut e = g.gen(&t, Vec::new(), &[], 6);
        if i % 3 == 0 {
            g.mutate(&mut e);
        }
        match agree(&e) {
            Ok(Some(_)) => accepted += 1,
            Ok(None) => rejected += 1,
            Err(m) => return Err(format!("{}: {}", e, m)),
        }
    }
    Ok((accepted, rejected))
}

/// Compare the checkers on every static, import-free typed corpus program,
/// all of which must typecheck.  Returns how many were compared.
pub fn static_corpus_agreement() -> Result<usize, String> {
    let mut n = 0;
    for path in super::corpus_files() {
        if super::is_untyped(&path) {
            continue;
        }
        let src = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let prog = parse_program(&src).map_err(|e| format!("{}: {}", path.display(), e))?;
        if !prog.imports.is_empty() || !prog.body.is_static() {
            continue;
        }
        match agree(&prog.body) {
            Ok(Some(_)) => n += 1,
            Ok(None) => return Err(format!("{} should typecheck", path.display())),
            Err(m) => return Err(format!("{}: {}", path.display(), m)),
        }
    }
    Ok(n)
}
