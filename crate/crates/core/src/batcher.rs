//! Grouping of consecutive sentences into compound sentences.
//!
//! Group sizes are drawn uniformly from 3..=7. The draw sequence is fixed by
//! the seed: a ChaCha8 stream (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! yields `u32` values, the value `u32::MAX` is rejected, and the size is
//! `3 + value % 5`. One stream is shared by all documents of a plan, in
//! corpus order. Groups never cross a document boundary; when fewer than
//! three sentences remain at the end of a document they form a short final
//! group.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabeledWord, Sentence};
use crate::error::{Error, Result};

pub const MIN_GROUP: usize = 3;
pub const MAX_GROUP: usize = 7;

/// Seeded source of group sizes.
pub struct SizeDraw {
    rng: ChaCha8Rng,
}

impl SizeDraw {
    pub fn new(seed: u64) -> Self {
        SizeDraw {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_size(&mut self) -> usize {
        let span = (MAX_GROUP - MIN_GROUP + 1) as u32;
        loop {
            // 2^32 - 1 is the single value that would bias the modulo
            let v = self.rng.next_u32();
            if v != u32::MAX {
                return MIN_GROUP + (v % span) as usize;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub doc_id: String,
    /// Index of the first sentence within the document.
    pub start: usize,
    /// Number of sentences.
    pub size: usize,
    pub word_count: usize,
    /// Final group of a document holding fewer than three sentences.
    pub short: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub seed: u64,
    pub groups: Vec<Group>,
}

/// A materialized group: borrowed sentences plus where they came from.
#[derive(Clone, Copy, Debug)]
pub struct CompoundSentence<'a> {
    pub index: usize,
    pub doc_id: &'a str,
    pub sentences: &'a [Sentence],
}

impl<'a> CompoundSentence<'a> {
    pub fn words(&self) -> impl Iterator<Item = &'a LabeledWord> + 'a {
        self.sentences.iter().flat_map(|s| s.words.iter())
    }

    pub fn labeled_words(&self) -> Vec<LabeledWord> {
        self.words().cloned().collect()
    }
}

fn group_into(doc_id: &str, sentences: &[Sentence], draw: &mut SizeDraw, groups: &mut Vec<Group>) {
    let mut start = 0;
    while start < sentences.len() {
        let remaining = sentences.len() - start;
        let size = if remaining < MIN_GROUP {
            remaining
        } else {
            draw.next_size().min(remaining)
        };
        let word_count = sentences[start..start + size].iter().map(Sentence::len).sum();
        groups.push(Group {
            doc_id: doc_id.to_string(),
            start,
            size,
            word_count,
            short: size < MIN_GROUP,
        });
        start += size;
    }
}

/// Plans the sentences of a single document.
pub fn group_sentences(doc_id: &str, sentences: &[Sentence], seed: u64) -> BatchPlan {
    let mut groups = Vec::new();
    group_into(doc_id, sentences, &mut SizeDraw::new(seed), &mut groups);
    BatchPlan { seed, groups }
}

/// Plans every document of `ds` in corpus order with one draw stream.
pub fn plan_dataset(ds: &Dataset, seed: u64) -> BatchPlan {
    let mut draw = SizeDraw::new(seed);
    let mut groups = Vec::new();
    for doc in &ds.documents {
        group_into(&doc.id, &doc.sentences, &mut draw, &mut groups);
    }
    BatchPlan { seed, groups }
}

/// The last word of a group: its label is trivially PERIOD (or QUESTION)
/// because the model sees `[SEP]` right after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrivialFinal {
    pub group: usize,
    /// Index into the plan's flattened word stream.
    pub position: usize,
}

pub fn mark_trivial_finals(plan: &BatchPlan) -> Vec<TrivialFinal> {
    let mut offset = 0;
    let mut out = Vec::with_capacity(plan.groups.len());
    for (i, g) in plan.groups.iter().enumerate() {
        offset += g.word_count;
        if g.word_count > 0 {
            out.push(TrivialFinal {
                group: i,
                position: offset - 1,
            });
        }
    }
    out
}

impl BatchPlan {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.groups.iter().map(|g| g.word_count).sum()
    }

    /// Resolves every group against its document in `ds`.
    pub fn compounds<'a>(&'a self, ds: &'a Dataset) -> Result<Vec<CompoundSentence<'a>>> {
        let docs: HashMap<&str, &[Sentence]> = ds
            .documents
            .iter()
            .map(|d| (d.id.as_str(), d.sentences.as_slice()))
            .collect();
        self.groups
            .iter()
            .enumerate()
            .map(|(index, g)| {
                let sentences = docs
                    .get(g.doc_id.as_str())
                    .and_then(|s| s.get(g.start..g.start + g.size))
                    .ok_or_else(|| {
                        Error::Argument(format!(
                            "plan group {index} ({} @ {}+{}) does not match the dataset",
                            g.doc_id, g.start, g.size
                        ))
                    })?;
                Ok(CompoundSentence {
                    index,
                    doc_id: &g.doc_id,
                    sentences,
                })
            })
            .collect()
    }

    /// Plan file: a `#seed<TAB>n` header, then `doc_id<TAB>start<TAB>size`
    /// per group.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "#seed\t{}", self.seed)?;
        for g in &self.groups {
            writeln!(w, "{}\t{}\t{}", g.doc_id, g.start, g.size)?;
        }
        Ok(())
    }

    /// Reads a plan file and binds it to `ds`, which supplies word counts.
    pub fn read<R: BufRead>(r: R, source_name: &str, ds: &Dataset) -> Result<BatchPlan> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(source_name, e))?,
            None => return Err(Error::parse(source_name, 1, "missing seed header")),
        };
        let seed = header
            .strip_prefix("#seed\t")
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| Error::parse(source_name, 1, "expected #seed<TAB>n"))?;

        let mut groups = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(source_name, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [doc_id, start, size] = fields[..] else {
                return Err(Error::parse(source_name, i + 1, "expected doc_id<TAB>start<TAB>size"));
            };
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(source_name, i + 1, format!("bad number {s:?}")))
            };
            let (start, size) = (num(start)?, num(size)?);
            let sentences = ds
                .document(doc_id)
                .and_then(|d| d.sentences.get(start..start + size))
                .ok_or_else(|| Error::parse(source_name, i + 1, format!("group {doc_id}@{start}+{size} is out of range")))?;
            groups.push(Group {
                doc_id: doc_id.to_string(),
                start,
                size,
                word_count: sentences.iter().map(Sentence::len).sum(),
                short: size < MIN_GROUP,
            });
        }
        Ok(BatchPlan { seed, groups })
    }
}
