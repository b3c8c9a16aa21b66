use std::fmt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ast::Span;
use crate::types::Type;

/// A blame label: a cast identifier plus a polarity.
///
/// Labels produced by the elaborator are positive; the wrap rule and the
/// send/receive cast rules create complemented ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlameLabel {
    pub id: u32,
    #[serde(default)]
    pub neg: bool,
}

impl BlameLabel {
    pub fn pos(id: u32) -> Self {
        BlameLabel { id, neg: false }
    }

    pub fn complement(self) -> Self {
        BlameLabel { id: self.id, neg: !self.neg }
    }

    pub fn is_positive(self) -> bool {
        !self.neg
    }
}

impl fmt::Display for BlameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.neg {
            write!(f, "ℓ{}⁻", self.id)
        } else {
            write!(f, "ℓ{}", self.id)
        }
    }
}

/// Hands out fresh positive labels in allocation order.
#[derive(Clone, Debug)]
pub struct LabelAllocator {
    next: u32,
}

impl LabelAllocator {
    pub fn new() -> Self {
        LabelAllocator { next: 1 }
    }

    pub fn starting_at(next: u32) -> Self {
        LabelAllocator { next }
    }

    pub fn fresh(&mut self) -> BlameLabel {
        let l = BlameLabel::pos(self.next);
        self.next += 1;
        l
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}

/// Where a cast came from: the subject's span in the source file and the
/// two types it converts between.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub label: BlameLabel,
    pub file: String,
    pub span: Span,
    pub from: Type,
    pub to: Type,
}

/// Renumber labels from `start` in source order of the cast subjects
/// (innermost-first: by end offset, then by start offset descending), so
/// that numbering does not depend on traversal order.  Returns the old-to-new
/// id map; `infos` is rewritten and sorted in place.
pub fn renumber(infos: &mut [LabelInfo], start: u32) -> BTreeMap<u32, u32> {
    infos.sort_by(|a, b| {
        (a.span.end, std::cmp::Reverse(a.span.start), a.label.id).cmp(&(
            b.span.end,
            std::cmp::Reverse(b.span.start),
            b.label.id,
        ))
    });
    let mut map = BTreeMap::new();
    for (i, info) in infos.iter_mut().enumerate() {
        let id = start + i as u32;
        map.insert(info.label.id, id);
        info.label = BlameLabel::pos(id);
    }
    map
}
