//! Types, session types, multiplicities and ground types.
//!
//! Session types sit inside [`Type`] through the explicit [`Type::Sess`]
//! wrapper, so the two grammars never mix by accident.  Choice branches are
//! kept in a `BTreeMap`, which makes structural equality independent of the
//! order in which labels were written.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Multiplicity of a value: unrestricted or linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mult {
    #[serde(rename = "un")]
    Un,
    #[serde(rename = "lin")]
    Lin,
}

impl Mult {
    /// The ordering `un ⊑ un`, `un ⊑ lin`, `lin ⊑ lin`.
    pub fn leq(self, other: Mult) -> bool {
        !(self == Mult::Lin && other == Mult::Un)
    }

    pub fn join(self, other: Mult) -> Mult {
        if self == Mult::Lin || other == Mult::Lin {
            Mult::Lin
        } else {
            Mult::Un
        }
    }

    pub fn meet(self, other: Mult) -> Mult {
        if self == Mult::Un || other == Mult::Un {
            Mult::Un
        } else {
            Mult::Lin
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mult::Un => "un",
            Mult::Lin => "lin",
        }
    }
}

impl fmt::Display for Mult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Branch maps of choice session types, sorted by label.
pub type Branches = BTreeMap<String, Session>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Unit,
    Int,
    Dyn,
    Fn(Mult, Box<Type>, Box<Type>),
    Prod(Mult, Box<Type>, Box<Type>),
    Sess(Session),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Session {
    Send(Box<Type>, Box<Session>),
    Recv(Box<Type>, Box<Session>),
    Select(Branches),
    Offer(Branches),
    EndOut,
    EndIn,
    DC,
}

// Small constructors; they keep the call sites in tests and the typer short.

pub fn fun(m: Mult, t: Type, u: Type) -> Type {
    Type::Fn(m, Box::new(t), Box::new(u))
}

pub fn prod(m: Mult, t: Type, u: Type) -> Type {
    Type::Prod(m, Box::new(t), Box::new(u))
}

pub fn send(t: Type, s: Session) -> Session {
    Session::Send(Box::new(t), Box::new(s))
}

pub fn recv(t: Type, s: Session) -> Session {
    Session::Recv(Box::new(t), Box::new(s))
}

pub fn select<L: Into<String>>(bs: impl IntoIterator<Item = (L, Session)>) -> Session {
    Session::Select(bs.into_iter().map(|(l, s)| (l.into(), s)).collect())
}

pub fn offer<L: Into<String>>(bs: impl IntoIterator<Item = (L, Session)>) -> Session {
    Session::Offer(bs.into_iter().map(|(l, s)| (l.into(), s)).collect())
}

impl Type {
    pub fn dc() -> Type {
        Type::Sess(Session::DC)
    }

    pub fn end_out() -> Type {
        Type::Sess(Session::EndOut)
    }

    pub fn end_in() -> Type {
        Type::Sess(Session::EndIn)
    }

    pub fn as_session(&self) -> Option<&Session> {
        match self {
            Type::Sess(s) => Some(s),
            _ => None,
        }
    }

    /// Number of constructor layers; base types have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Type::Unit | Type::Int | Type::Dyn => 1,
            Type::Fn(_, t, u) | Type::Prod(_, t, u) => 1 + t.depth().max(u.depth()),
            Type::Sess(s) => s.depth(),
        }
    }

    /// True if neither `Dyn` nor `DC` occurs anywhere in the type.
    pub fn is_static(&self) -> bool {
        match self {
            Type::Unit | Type::Int => true,
            Type::Dyn => false,
            Type::Fn(_, t, u) | Type::Prod(_, t, u) => t.is_static() && u.is_static(),
            Type::Sess(s) => s.is_static(),
        }
    }
}

impl Session {
    pub fn depth(&self) -> usize {
        match self {
            Session::EndOut | Session::EndIn | Session::DC => 1,
            Session::Send(t, s) | Session::Recv(t, s) => 1 + t.depth().max(s.depth()),
            Session::Select(bs) | Session::Offer(bs) => {
                1 + bs.values().map(Session::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            Session::EndOut | Session::EndIn => true,
            Session::DC => false,
            Session::Send(t, s) | Session::Recv(t, s) => t.is_static() && s.is_static(),
            Session::Select(bs) | Session::Offer(bs) => bs.values().all(Session::is_static),
        }
    }

    /// Choice types must carry at least one label.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Session::EndOut | Session::EndIn | Session::DC => true,
            Session::Send(t, s) | Session::Recv(t, s) => type_well_formed(t) && s.is_well_formed(),
            Session::Select(bs) | Session::Offer(bs) => {
                !bs.is_empty() && bs.values().all(Session::is_well_formed)
            }
        }
    }
}

pub fn type_well_formed(t: &Type) -> bool {
    match t {
        Type::Unit | Type::Int | Type::Dyn => true,
        Type::Fn(_, a, b) | Type::Prod(_, a, b) => type_well_formed(a) && type_well_formed(b),
        Type::Sess(s) => s.is_well_formed(),
    }
}

pub fn dual(s: &Session) -> Session {
    match s {
        Session::Send(t, r) => Session::Recv(t.clone(), Box::new(dual(r))),
        Session::Recv(t, r) => Session::Send(t.clone(), Box::new(dual(r))),
        Session::Select(bs) => Session::Offer(bs.iter().map(|(l, r)| (l.clone(), dual(r))).collect()),
        Session::Offer(bs) => Session::Select(bs.iter().map(|(l, r)| (l.clone(), dual(r))).collect()),
        Session::EndOut => Session::EndIn,
        Session::EndIn => Session::EndOut,
        Session::DC => Session::DC,
    }
}

pub fn mult_of(t: &Type) -> Mult {
    match t {
        Type::Unit | Type::Int | Type::Dyn => Mult::Un,
        Type::Fn(m, _, _) | Type::Prod(m, _, _) => *m,
        Type::Sess(_) => Mult::Lin,
    }
}

pub fn is_lin(t: &Type) -> bool {
    mult_of(t) == Mult::Lin
}

pub fn is_un(t: &Type) -> bool {
    mult_of(t) == Mult::Un
}

/// `mult_of(t) ⊑ n`.
pub fn mult_at_most(t: &Type, n: Mult) -> bool {
    mult_of(t).leq(n)
}

/// Ground types: `Unit`, `Int`, `DC`, `Dyn →m Dyn` and `Dyn ×m Dyn`.
///
/// Ground *session* types (`!Dyn.DC`, `&{l: DC}`, `End!`, ...) are a separate
/// class, see [`is_ground_session`]; the ground type of every session type is
/// `DC`, which is what makes the ground type of a type unique.
pub fn is_ground(t: &Type) -> bool {
    match t {
        Type::Unit | Type::Int => true,
        Type::Sess(Session::DC) => true,
        Type::Fn(_, a, b) | Type::Prod(_, a, b) => **a == Type::Dyn && **b == Type::Dyn,
        Type::Dyn | Type::Sess(_) => false,
    }
}

pub fn is_ground_session(s: &Session) -> bool {
    match s {
        Session::Send(t, r) | Session::Recv(t, r) => **t == Type::Dyn && **r == Session::DC,
        Session::Select(bs) | Session::Offer(bs) => bs.values().all(|r| *r == Session::DC),
        Session::EndOut | Session::EndIn => true,
        Session::DC => false,
    }
}

/// The unique ground type consistent with `t`; `None` for `Dyn`.
pub fn ground_of(t: &Type) -> Option<Type> {
    match t {
        Type::Dyn => None,
        Type::Unit => Some(Type::Unit),
        Type::Int => Some(Type::Int),
        Type::Fn(m, _, _) => Some(fun(*m, Type::Dyn, Type::Dyn)),
        Type::Prod(m, _, _) => Some(prod(*m, Type::Dyn, Type::Dyn)),
        Type::Sess(_) => Some(Type::dc()),
    }
}

/// The unique ground session type consistent with `s`; `None` for `DC`.
pub fn ground_session_of(s: &Session) -> Option<Session> {
    match s {
        Session::DC => None,
        Session::Send(..) => Some(send(Type::Dyn, Session::DC)),
        Session::Recv(..) => Some(recv(Type::Dyn, Session::DC)),
        Session::Select(bs) => Some(Session::Select(
            bs.keys().map(|l| (l.clone(), Session::DC)).collect(),
        )),
        Session::Offer(bs) => Some(Session::Offer(
            bs.keys().map(|l| (l.clone(), Session::DC)).collect(),
        )),
        Session::EndOut => Some(Session::EndOut),
        Session::EndIn => Some(Session::EndIn),
    }
}

// ---------------------------------------------------------------------------
// Printing, in the surface syntax accepted by the parser.

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_type(self, f, 0)
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_session(self, f)
    }
}

// prec 0: anything; 1: operand of a product or the domain of an arrow;
// 2: payload of a send/receive.
fn fmt_type(t: &Type, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    match t {
        Type::Unit => f.write_str("Unit"),
        Type::Int => f.write_str("Int"),
        Type::Dyn => f.write_str("Dyn"),
        Type::Fn(m, a, b) => {
            if prec > 0 {
                f.write_str("(")?;
            }
            fmt_type(a, f, 1)?;
            write!(f, " -{}> ", m)?;
            fmt_type(b, f, 0)?;
            if prec > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Type::Prod(m, a, b) => {
            if prec > 0 {
                f.write_str("(")?;
            }
            fmt_type(a, f, 1)?;
            write!(f, " *{} ", m)?;
            fmt_type(b, f, 1)?;
            if prec > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Type::Sess(s @ (Session::Send(..) | Session::Recv(..))) if prec >= 2 => {
            write!(f, "({})", s)
        }
        Type::Sess(s) => fmt_session(s, f),
    }
}

fn fmt_session(s: &Session, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match s {
        Session::Send(t, r) => {
            f.write_str("!")?;
            fmt_type(t, f, 2)?;
            f.write_str(".")?;
            fmt_session(r, f)
        }
        Session::Recv(t, r) => {
            f.write_str("?")?;
            fmt_type(t, f, 2)?;
            f.write_str(".")?;
            fmt_session(r, f)
        }
        Session::Select(bs) => fmt_branches(f, "+", bs),
        Session::Offer(bs) => fmt_branches(f, "&", bs),
        Session::EndOut => f.write_str("End!"),
        Session::EndIn => f.write_str("End?"),
        Session::DC => f.write_str("DC"),
    }
}

fn fmt_branches(f: &mut fmt::Formatter<'_>, sigil: &str, bs: &Branches) -> fmt::Result {
    write!(f, "{}{{", sigil)?;
    for (i, (l, s)) in bs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}: {}", l, s)?;
    }
    f.write_str("}")
}
