use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledWord, Sentence};
use crate::error::{Error, Result};
use crate::label::PunctClass;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn words(&self) -> impl Iterator<Item = &LabeledWord> {
        self.sentences.iter().flat_map(|s| s.words.iter())
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Labeled documents in corpus order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub documents: Vec<Document>,
}

impl Dataset {
    pub fn new(documents: Vec<Document>) -> Self {
        Dataset { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &LabeledWord> {
        self.documents.iter().flat_map(Document::words)
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }
}

/// Per-class word counts. Serializes with the keys
/// `words`, `period`, `comma`, `question`, `empty`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub words: u64,
    pub period: u64,
    pub comma: u64,
    pub question: u64,
    pub empty: u64,
}

impl ClassCounts {
    pub fn add(&mut self, class: PunctClass) {
        self.words += 1;
        match class {
            PunctClass::Period => self.period += 1,
            PunctClass::Comma => self.comma += 1,
            PunctClass::Question => self.question += 1,
            PunctClass::Empty => self.empty += 1,
        }
    }

    pub fn get(&self, class: PunctClass) -> u64 {
        match class {
            PunctClass::Period => self.period,
            PunctClass::Comma => self.comma,
            PunctClass::Question => self.question,
            PunctClass::Empty => self.empty,
        }
    }

    pub fn from_labels<I: IntoIterator<Item = PunctClass>>(labels: I) -> Self {
        let mut counts = ClassCounts::default();
        for l in labels {
            counts.add(l);
        }
        counts
    }
}

impl std::ops::Add for ClassCounts {
    type Output = ClassCounts;

    fn add(self, o: ClassCounts) -> ClassCounts {
        ClassCounts {
            words: self.words + o.words,
            period: self.period + o.period,
            comma: self.comma + o.comma,
            question: self.question + o.question,
            empty: self.empty + o.empty,
        }
    }
}

pub fn dataset_stats(ds: &Dataset) -> ClassCounts {
    ClassCounts::from_labels(ds.words().map(|w| w.label))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitWarning {
    EmptyTrain,
    EmptyTest,
}

impl fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitWarning::EmptyTrain => f.write_str("split left the training set empty"),
            SplitWarning::EmptyTest => f.write_str("split left the test set empty"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<SplitWarning>,
}

/// Assigns whole documents to train or test.
///
/// Document indices are shuffled with a ChaCha8 generator seeded from
/// `cfg.seed`; the first `round(n * train_fraction)` go to train. Both sides
/// keep the original corpus order.
pub fn split_dataset(ds: &Dataset, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Argument("cannot split an empty dataset".into()));
    }
    let n = ds.len();
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);

    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (doc, is_train) in ds.documents.iter().zip(in_train) {
        if is_train {
            train.push(doc.clone());
        } else {
            test.push(doc.clone());
        }
    }

    let mut warnings = Vec::new();
    if train.is_empty() {
        warnings.push(SplitWarning::EmptyTrain);
    }
    if test.is_empty() {
        warnings.push(SplitWarning::EmptyTest);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Split {
        train: Dataset::new(train),
        test: Dataset::new(test),
        warnings,
    })
}
