//! Runtime configurations.
//!
//! A configuration is kept in a normal form for structural congruence: all
//! channel and reference binders live at the top level, parallel composition
//! is a flat list, and unit processes are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::blame::BlameLabel;
use crate::term::{cast, Term};
use crate::types::{dual, Session, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proc {
    Expr(Term),
    /// `a ↦ v : G ⇒p Dyn`
    Cell { r: u32, value: Term, ground: Type, label: BlameLabel },
    /// `a ↦ locked_p`
    Locked { r: u32, label: BlameLabel },
    /// `blame p q X`
    Blame { p: BlameLabel, q: BlameLabel, lin: BTreeSet<u32> },
    /// `blame p X`, raised when an unread cell is collected.
    BlameGc { p: BlameLabel, lin: BTreeSet<u32> },
}

impl Proc {
    pub fn is_blame(&self) -> bool {
        matches!(self, Proc::Blame { .. } | Proc::BlameGc { .. })
    }

    pub fn cell_ref(&self) -> Option<u32> {
        match self {
            Proc::Cell { r, .. } | Proc::Locked { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// Labels a blame process charges.
    pub fn blamed(&self) -> Vec<BlameLabel> {
        match self {
            Proc::Blame { p, q, .. } => vec![*p, *q],
            Proc::BlameGc { p, .. } => vec![*p],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Process {
    pub id: u32,
    pub body: Proc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub procs: Vec<Process>,
    /// Live channel pairs: pair `k` binds endpoints `2k` and `2k+1`; the
    /// session type stored is that of the even endpoint.
    pub chans: BTreeMap<u32, Session>,
    pub next_pair: u32,
    pub next_ref: u32,
    pub next_pid: u32,
    /// Value of the main process once it has finished.
    pub result: Option<Term>,
}

impl Config {
    /// The initial configuration `⟨e⟩`.
    pub fn new(e: Term) -> Self {
        let mut c = Config {
            procs: Vec::new(),
            chans: BTreeMap::new(),
            next_pair: 0,
            next_ref: 0,
            next_pid: 0,
            result: None,
        };
        c.spawn(Proc::Expr(e));
        c.prune();
        c
    }

    pub fn spawn(&mut self, body: Proc) -> u32 {
        let id = self.next_pid;
        self.next_pid += 1;
        self.procs.push(Process { id, body });
        id
    }

    /// Session type of a single endpoint.
    pub fn chan_type(&self, c: u32) -> Option<Session> {
        let s = self.chans.get(&(c / 2))?;
        Some(if c % 2 == 0 { s.clone() } else { dual(s) })
    }

    /// Every live endpoint.
    pub fn endpoints(&self) -> BTreeSet<u32> {
        self.chans.keys().flat_map(|k| [2 * k, 2 * k + 1]).collect()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.procs.iter().position(|p| p.id == id)
    }

    /// Drop `⟨()⟩` processes, remembering the main process's value.
    pub fn prune(&mut self) {
        for p in &self.procs {
            if p.id == 0 {
                if let Proc::Expr(t) = &p.body {
                    if t.is_value() {
                        self.result = Some(t.clone());
                    }
                }
            }
        }
        self.procs.retain(|p| !matches!(p.body, Proc::Expr(Term::Unit)));
    }

    pub fn blames(&self) -> Vec<&Proc> {
        self.procs.iter().map(|p| &p.body).filter(|p| p.is_blame()).collect()
    }

    /// True when every expression process is a value.
    pub fn all_values(&self) -> bool {
        self.procs.iter().all(|p| match &p.body {
            Proc::Expr(t) => t.is_value(),
            _ => true,
        })
    }
}

fn fmt_set(set: &BTreeSet<u32>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str("{")?;
    for (i, c) in set.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "c{}", c)?;
    }
    f.write_str("}")
}

impl fmt::Display for Proc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proc::Expr(t) => write!(f, "⟨{}⟩", t),
            Proc::Cell { r, value, ground, label } => {
                write!(f, "a{} ↦ {}", r, cast(value.clone(), ground.clone(), Type::Dyn, *label))
            }
            Proc::Locked { r, label } => write!(f, "a{} ↦ locked {}", r, label),
            Proc::Blame { p, q, lin } => {
                write!(f, "blame {} {} ", p, q)?;
                fmt_set(lin, f)
            }
            Proc::BlameGc { p, lin } => {
                write!(f, "blame_gc {} ", p)?;
                fmt_set(lin, f)
            }
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in self.chans.keys() {
            write!(f, "(νc{},c{})", 2 * k, 2 * k + 1)?;
        }
        let refs: Vec<u32> = self.procs.iter().filter_map(|p| p.body.cell_ref()).collect();
        for r in &refs {
            write!(f, "(νa{})", r)?;
        }
        let wrap = (!self.chans.is_empty() || !refs.is_empty()) && !self.procs.is_empty();
        if wrap {
            f.write_str("(")?;
        }
        if self.procs.is_empty() {
            f.write_str("⟨()⟩")?;
        }
        for (i, p) in self.procs.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{}", p.body)?;
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}
