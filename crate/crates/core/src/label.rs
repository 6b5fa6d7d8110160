//! The four punctuation classes a word can be tagged with.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Label id carried by positions that are excluded from loss and scoring
/// (continuation pieces, `[CLS]`, `[SEP]`, `[PAD]`).
pub const MASK_LABEL: i64 = -100;

/// Punctuation following a word. The discriminants are the label ids fed to
/// the tagger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PunctClass {
    Empty = 0,
    Period = 1,
    Comma = 2,
    Question = 3,
}

impl PunctClass {
    /// All classes in label-id order.
    pub const ALL: [PunctClass; 4] = [
        PunctClass::Empty,
        PunctClass::Period,
        PunctClass::Comma,
        PunctClass::Question,
    ];

    /// Row/column order used by confusion matrices and reports.
    pub const MATRIX_ORDER: [PunctClass; 4] = [
        PunctClass::Period,
        PunctClass::Comma,
        PunctClass::Question,
        PunctClass::Empty,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: i64) -> Option<Self> {
        match id {
            0 => Some(PunctClass::Empty),
            1 => Some(PunctClass::Period),
            2 => Some(PunctClass::Comma),
            3 => Some(PunctClass::Question),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PunctClass::Empty => "EMPTY",
            PunctClass::Period => "PERIOD",
            PunctClass::Comma => "COMMA",
            PunctClass::Question => "QUESTION",
        }
    }

    /// The character rendered after a word carrying this label.
    pub fn mark(self) -> Option<char> {
        match self {
            PunctClass::Empty => None,
            PunctClass::Period => Some('.'),
            PunctClass::Comma => Some(','),
            PunctClass::Question => Some('?'),
        }
    }

    pub fn from_mark(c: char) -> Option<Self> {
        match c {
            '.' => Some(PunctClass::Period),
            ',' => Some(PunctClass::Comma),
            '?' => Some(PunctClass::Question),
            _ => None,
        }
    }

    /// PERIOD and QUESTION close a sentence.
    pub fn is_terminal(self) -> bool {
        matches!(self, PunctClass::Period | PunctClass::Question)
    }

    /// Index of this class in [`PunctClass::MATRIX_ORDER`].
    pub fn matrix_index(self) -> usize {
        match self {
            PunctClass::Period => 0,
            PunctClass::Comma => 1,
            PunctClass::Question => 2,
            PunctClass::Empty => 3,
        }
    }
}

impl fmt::Display for PunctClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PunctClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EMPTY" => Ok(PunctClass::Empty),
            "PERIOD" => Ok(PunctClass::Period),
            "COMMA" => Ok(PunctClass::Comma),
            "QUESTION" => Ok(PunctClass::Question),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}
