//! Corpus ingestion: text normalization and word/label extraction.
//!
//! A raw document goes through [`normalize`] (dash-linebreak joining, symbol
//! folding, lowercasing) and then [`extract_labels`], which turns the clean
//! text into sentences of [`LabeledWord`]s. Each word is tagged with the
//! punctuation mark that immediately follows it.

mod dataset;
pub mod io;

pub use dataset::{dataset_stats, split_dataset, ClassCounts, Dataset, Document, Split, SplitConfig, SplitWarning};

use serde::{Deserialize, Serialize};

use crate::label::PunctClass;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanDocument {
    pub id: String,
    pub text: String,
}

/// A lowercase, punctuation-free word and the class of the mark after it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledWord {
    pub word: String,
    pub label: PunctClass,
}

impl LabeledWord {
    pub fn new(word: impl Into<String>, label: PunctClass) -> Self {
        LabeledWord {
            word: word.into(),
            label,
        }
    }
}

/// An ordered run of labeled words. A well-formed sentence ends in PERIOD or
/// QUESTION; the trailing sentence of a document may be unterminated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub words: Vec<LabeledWord>,
}

impl Sentence {
    pub fn new(words: Vec<LabeledWord>) -> Self {
        Sentence { words }
    }

    pub fn is_terminated(&self) -> bool {
        self.words.last().is_some_and(|w| w.label.is_terminal())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtractWarning {
    /// A punctuation mark with no word to attach to.
    DroppedMark { offset: usize, mark: char },
    /// The text ended before the last sentence was closed.
    Unterminated { sentence: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub sentences: Vec<Sentence>,
    pub warnings: Vec<ExtractWarning>,
}

impl Extraction {
    pub fn words(&self) -> impl Iterator<Item = &LabeledWord> {
        self.sentences.iter().flat_map(|s| s.words.iter())
    }
}

pub fn normalize(doc: &RawDocument) -> CleanDocument {
    CleanDocument {
        id: doc.id.clone(),
        text: normalize_text(&doc.text),
    }
}

/// Applies the preprocessing rules in order:
///
/// 1. a dash followed by a line break is deleted, rejoining split words;
/// 2. `#` is deleted;
/// 3. `-` becomes `,`;
/// 4. `;` becomes `:`;
/// 5. `!` becomes `.`;
/// 6. `"` becomes `,`;
/// 7. every letter is lowercased.
///
/// Spaces and tabs directly before a comma are removed, so `"aldrig - igen"`
/// becomes `"aldrig, igen"`. The function is idempotent.
pub fn normalize_text(text: &str) -> String {
    let joined = text.replace("-\r\n", "").replace("-\n", "");
    let mut out = String::with_capacity(joined.len());
    for c in joined.chars() {
        match c {
            '#' => {}
            '-' | '"' | ',' => {
                let kept = out.trim_end_matches([' ', '\t']).len();
                out.truncate(kept);
                out.push(',');
            }
            ';' => out.push(':'),
            '!' => out.push('.'),
            c => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// Splits normalized text into sentences of labeled words.
///
/// A mark attaches to the closest preceding word that has not yet received
/// one; further marks in the same run (`"?."`, `"..."`) are ignored. A mark
/// with no word to attach to is dropped with a warning. `:` separates words
/// and carries no label.
pub fn extract_labels(doc: &CleanDocument) -> Extraction {
    extract_labels_from_text(&doc.text)
}

pub fn extract_labels_from_text(text: &str) -> Extraction {
    let mut out = Extraction::default();
    let mut current: Vec<LabeledWord> = Vec::new();
    let mut word = String::new();
    // the last word of `current` is still waiting for its mark
    let mut open_word = false;
    let mut prev_was_mark = false;

    for (offset, c) in text.char_indices() {
        if c.is_whitespace() || c == ':' {
            if !word.is_empty() {
                current.push(LabeledWord::new(std::mem::take(&mut word), PunctClass::Empty));
                open_word = true;
            }
            prev_was_mark = false;
            continue;
        }
        let Some(class) = PunctClass::from_mark(c) else {
            word.push(c);
            prev_was_mark = false;
            continue;
        };

        if !word.is_empty() {
            current.push(LabeledWord::new(std::mem::take(&mut word), PunctClass::Empty));
            open_word = true;
        }
        if open_word {
            // open_word implies current is non-empty
            let last = current.last_mut().expect("open word");
            last.label = class;
            open_word = false;
            if class.is_terminal() {
                out.sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
        } else if !prev_was_mark {
            out.warnings.push(ExtractWarning::DroppedMark { offset, mark: c });
        }
        prev_was_mark = true;
    }

    if !word.is_empty() {
        current.push(LabeledWord::new(word, PunctClass::Empty));
    }
    if !current.is_empty() {
        out.warnings.push(ExtractWarning::Unterminated {
            sentence: out.sentences.len(),
        });
        out.sentences.push(Sentence::new(current));
    }
    out
}
