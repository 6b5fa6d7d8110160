//! Replay of logits produced by an external model.
//!
//! Logit file (JSON Lines): a header object declaring the class order, then
//! one object per word piece in sequence order, skipping `[CLS]`, `[SEP]`
//! and padding:
//!
//! ```text
//! {"order":["PERIOD","EMPTY","COMMA","QUESTION"]}
//! {"t":"himmel","l":[5.3,-1.6,-2.4,-1.7]}
//! {"t":"##en","l":[4.5,-3.2,-3.2,1.1]}
//! ```
//!
//! Rows for consecutive sequences follow each other with no separator.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Logits, TaggerBackend, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::label::PunctClass;
use crate::tokenizer::EncodedSequence;

/// Class order written to logit files.
pub const FILE_ORDER: [PunctClass; 4] = [
    PunctClass::Period,
    PunctClass::Empty,
    PunctClass::Comma,
    PunctClass::Question,
];

/// One token's logits, indexed by label id in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitRecord {
    pub token: String,
    pub logits: Logits,
}

#[derive(Serialize, Deserialize)]
struct Header {
    order: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    t: String,
    l: Vec<f64>,
}

pub fn write_logit_file<W: Write>(mut w: W, records: &[LogitRecord]) -> Result<()> {
    let header = Header {
        order: FILE_ORDER.iter().map(|c| c.name().to_string()).collect(),
    };
    let io = |e| Error::io("logit file", e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for r in records {
        let row = Row {
            t: r.token.clone(),
            l: FILE_ORDER.iter().map(|c| r.logits[c.id()]).collect(),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

/// Reads a logit file. An empty file holds no records; otherwise the first
/// line must declare the order, which may be any permutation of the four
/// class names.
pub fn read_logit_file<R: BufRead>(r: R, source_name: &str) -> Result<Vec<LogitRecord>> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let Some((i, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = header.map_err(|e| Error::io(source_name, e))?;
    let header: Header =
        serde_json::from_str(&header).map_err(|e| Error::parse(source_name, i + 1, format!("bad header: {e}")))?;
    let mut order = Vec::with_capacity(NUM_CLASSES);
    for name in &header.order {
        let class: PunctClass = name.parse().map_err(|m: String| Error::parse(source_name, i + 1, m))?;
        if order.contains(&class) {
            return Err(Error::parse(source_name, i + 1, format!("class {name} listed twice")));
        }
        order.push(class);
    }
    if order.len() != NUM_CLASSES {
        return Err(Error::parse(source_name, i + 1, "order must name all four classes"));
    }

    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        let row: Row = serde_json::from_str(&line).map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        if row.l.len() != NUM_CLASSES || row.l.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(source_name, i + 1, "expected four finite logits"));
        }
        let mut logits = [0.0; NUM_CLASSES];
        for (class, v) in order.iter().zip(&row.l) {
            logits[class.id()] = *v;
        }
        records.push(LogitRecord { token: row.t, logits });
    }
    Ok(records)
}

/// Serves stored logits verbatim, consuming records in order across calls.
#[derive(Clone, Debug)]
pub struct ReplayBackend {
    records: Vec<LogitRecord>,
    cursor: usize,
}

impl ReplayBackend {
    pub fn new(records: Vec<LogitRecord>) -> Self {
        ReplayBackend { records, cursor: 0 }
    }

    pub fn from_reader<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        Ok(Self::new(read_logit_file(r, source_name)?))
    }

    /// Records not yet consumed.
    pub fn remaining(&self) -> usize {
        self.records.len() - self.cursor
    }
}

impl TaggerBackend for ReplayBackend {
    fn logits(&mut self, seq: &EncodedSequence) -> Result<Vec<Logits>> {
        let mut out = vec![[0.0; NUM_CLASSES]; seq.len()];
        for p in seq.piece_positions() {
            let expected = &seq.tokens[p];
            let Some(rec) = self.records.get(self.cursor) else {
                return Err(Error::Alignment {
                    position: self.cursor,
                    expected: expected.clone(),
                    found: "<end of logit file>".into(),
                });
            };
            if &rec.token != expected {
                return Err(Error::Alignment {
                    position: self.cursor,
                    expected: expected.clone(),
                    found: rec.token.clone(),
                });
            }
            out[p] = rec.logits;
            self.cursor += 1;
        }
        Ok(out)
    }
}

/// Collects `backend`'s logits at every word-piece position, in the layout
/// [`ReplayBackend`] consumes.
pub fn export_logits<B: TaggerBackend + ?Sized>(backend: &mut B, seqs: &[EncodedSequence]) -> Result<Vec<LogitRecord>> {
    let mut out = Vec::new();
    for seq in seqs {
        let logits = backend.logits(seq)?;
        for p in seq.piece_positions() {
            out.push(LogitRecord {
                token: seq.tokens[p].clone(),
                logits: logits[p],
            });
        }
    }
    Ok(out)
}
