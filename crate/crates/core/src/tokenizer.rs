//! WordPiece encoding of labeled compounds.
//!
//! Words are split greedily into the longest matching vocabulary pieces;
//! non-initial pieces carry the `##` prefix. Only the first (root) piece of a
//! word carries the word's label, every other position is masked with
//! [`MASK_LABEL`].

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::LabeledWord;
use crate::error::{Error, Result};
use crate::label::{PunctClass, MASK_LABEL};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_MAX_LEN: usize = 512;

/// Words longer than this (in chars) map straight to `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

/// Piece-to-id table. Ids are line numbers of the vocab file.
#[derive(Clone, Debug)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    pieces: Vec<String>,
    pub unk_id: u32,
    pub cls_id: u32,
    pub sep_id: u32,
    pub pad_id: u32,
}

impl Vocab {
    pub fn from_pieces<I, S>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pieces: Vec<String> = pieces.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if p.is_empty() || p == CONTINUATION_PREFIX {
                return Err(Error::Config(format!("vocab entry {i} is empty")));
            }
            if ids.insert(p.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate vocab entry {p:?} at id {i}")));
            }
        }
        let reserved = |tok: &str| {
            ids.get(tok)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocab is missing reserved token {tok}")))
        };
        Ok(Vocab {
            unk_id: reserved(UNK)?,
            cls_id: reserved(CLS)?,
            sep_id: reserved(SEP)?,
            pad_id: reserved(PAD)?,
            ids,
            pieces,
        })
    }

    /// Reads a vocab file: one piece per line, LF endings.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let lines = r
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io("vocab", e))?;
        Self::from_pieces(lines)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenPiece {
    pub text: String,
    pub id: u32,
    pub is_continuation: bool,
}

/// Greedy longest-match-first segmentation. If any remainder of the word has
/// no matching piece, the whole word becomes a single `[UNK]`.
pub fn wordpiece_tokenize(word: &str, vocab: &Vocab) -> Vec<TokenPiece> {
    let unk = || {
        vec![TokenPiece {
            text: UNK.to_string(),
            id: vocab.unk_id,
            is_continuation: false,
        }]
    };
    if word.is_empty() || word.chars().count() > MAX_WORD_CHARS {
        return unk();
    }

    let mut pieces = Vec::new();
    let mut candidate = String::with_capacity(word.len() + CONTINUATION_PREFIX.len());
    let mut rest = word;
    while !rest.is_empty() {
        let mut end = rest.len();
        let found = loop {
            candidate.clear();
            if !pieces.is_empty() {
                candidate.push_str(CONTINUATION_PREFIX);
            }
            candidate.push_str(&rest[..end]);
            if let Some(id) = vocab.id(&candidate) {
                break Some(id);
            }
            match rest[..end].char_indices().next_back() {
                Some((0, _)) | None => break None,
                Some((last, _)) => end = last,
            }
        };
        let Some(id) = found else {
            return unk();
        };
        pieces.push(TokenPiece {
            text: candidate.clone(),
            id,
            is_continuation: !pieces.is_empty(),
        });
        rest = &rest[end..];
    }
    pieces
}

/// A framed, padded model input.
///
/// Layout: `[CLS]`, the word pieces, `[SEP]`, then `[PAD]` up to the budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub tokens: Vec<String>,
    pub labels: Vec<i64>,
    pub attention_mask: Vec<u8>,
    /// Positions of root pieces, one per source word.
    pub word_starts: Vec<usize>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of attended positions, `[CLS]` through `[SEP]`.
    pub fn content_len(&self) -> usize {
        self.attention_mask.iter().take_while(|&&m| m == 1).count()
    }

    pub fn sep_position(&self) -> usize {
        self.content_len().saturating_sub(1)
    }

    /// Positions holding word pieces (everything attended except the frame).
    pub fn piece_positions(&self) -> std::ops::Range<usize> {
        1..self.sep_position()
    }

    pub fn word_count(&self) -> usize {
        self.word_starts.len()
    }

    /// Labels at the root positions, in word order.
    pub fn word_labels(&self) -> Vec<PunctClass> {
        self.word_starts
            .iter()
            .filter_map(|&p| PunctClass::from_id(self.labels[p]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Encoded {
    Sequence(EncodedSequence),
    /// The compound needs more than `max_len` positions and is excluded.
    Dropped { positions: usize },
}

impl Encoded {
    pub fn sequence(self) -> Option<EncodedSequence> {
        match self {
            Encoded::Sequence(s) => Some(s),
            Encoded::Dropped { .. } => None,
        }
    }
}

/// Encodes one compound. Compounds that do not fit in `max_len` positions
/// (pieces plus `[CLS]` and `[SEP]`) are dropped whole, never truncated.
pub fn encode_compound(words: &[LabeledWord], vocab: &Vocab, max_len: usize) -> Result<Encoded> {
    if words.is_empty() {
        return Err(Error::Argument("cannot encode an empty compound".into()));
    }
    if max_len < 3 {
        return Err(Error::Config(format!("max_len must be at least 3, got {max_len}")));
    }

    let mut ids = vec![vocab.cls_id];
    let mut tokens = vec![CLS.to_string()];
    let mut labels = vec![MASK_LABEL];
    let mut word_starts = Vec::with_capacity(words.len());
    for w in words {
        word_starts.push(ids.len());
        for (i, piece) in wordpiece_tokenize(&w.word, vocab).into_iter().enumerate() {
            ids.push(piece.id);
            tokens.push(piece.text);
            labels.push(if i == 0 { w.label.id() as i64 } else { MASK_LABEL });
        }
    }
    let positions = ids.len() + 1;
    if positions > max_len {
        return Ok(Encoded::Dropped { positions });
    }
    ids.push(vocab.sep_id);
    tokens.push(SEP.to_string());
    labels.push(MASK_LABEL);

    let mut attention_mask = vec![1u8; positions];
    attention_mask.resize(max_len, 0);
    ids.resize(max_len, vocab.pad_id);
    tokens.resize(max_len, PAD.to_string());
    labels.resize(max_len, MASK_LABEL);

    Ok(Encoded::Sequence(EncodedSequence {
        ids,
        tokens,
        labels,
        attention_mask,
        word_starts,
    }))
}

/// Renders words with their marks: single spaces between words, the mark
/// glued to the preceding word.
pub fn apply_tags<S: AsRef<str>>(words: &[S], tags: &[PunctClass]) -> Result<String> {
    if words.len() != tags.len() {
        return Err(Error::Argument(format!(
            "{} words but {} tags",
            words.len(),
            tags.len()
        )));
    }
    let mut out = String::new();
    for (i, (w, t)) in words.iter().zip(tags).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(w.as_ref());
        if let Some(m) = t.mark() {
            out.push(m);
        }
    }
    Ok(out)
}

/// Debug dump: `piece<TAB>id<TAB>label<TAB>mask` per position.
pub fn write_encoded_dump<W: Write>(mut w: W, seq: &EncodedSequence) -> std::io::Result<()> {
    for i in 0..seq.len() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            seq.tokens[i], seq.ids[i], seq.labels[i], seq.attention_mask[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use PunctClass::*;

    fn vocab(extra: &[&str]) -> Vocab {
        let mut pieces = vec![PAD, UNK, CLS, SEP];
        pieces.extend_from_slice(extra);
        Vocab::from_pieces(pieces).unwrap()
    }

    fn texts(pieces: &[TokenPiece]) -> Vec<&str> {
        pieces.iter().map(|p| p.text.as_str()).collect()
    }

    #[test]
    fn wordpiece_examples() {
        let v = vocab(&["mör", "mö", "##lunda", "##lu", "de", "himmel", "##en", "##e"]);
        assert_eq!(texts(&wordpiece_tokenize("mörlunda", &v)), ["mör", "##lunda"]);
        assert_eq!(texts(&wordpiece_tokenize("de", &v)), ["de"]);
        assert_eq!(texts(&wordpiece_tokenize("himmelen", &v)), ["himmel", "##en"]);
        assert_eq!(texts(&wordpiece_tokenize("xyz", &v)), [UNK]);
        // a dead end after a matched prefix is still a whole-word UNK
        assert_eq!(texts(&wordpiece_tokenize("himmelx", &v)), [UNK]);
        let pieces = wordpiece_tokenize("mörlunda", &v);
        assert!(!pieces[0].is_continuation && pieces[1].is_continuation);
        assert_eq!(pieces[1].id, v.id("##lunda").unwrap());
    }

    #[test]
    fn vocab_rejects_missing_reserved_and_duplicates() {
        assert!(Vocab::from_pieces(["[PAD]", "[UNK]", "[CLS]"]).is_err());
        assert!(Vocab::from_pieces(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "a"]).is_err());
        assert!(Vocab::from_pieces(["[PAD]", "[UNK]", "[CLS]", "[SEP]", ""]).is_err());
        let v = vocab(&["a"]);
        assert_eq!((v.pad_id, v.unk_id, v.cls_id, v.sep_id), (0, 1, 2, 3));
        assert_eq!(v.piece(4), Some("a"));
    }

    #[test]
    fn encode_question_word() {
        let v = vocab(&["mör", "##lunda"]);
        let seq = encode_compound(&[LabeledWord::new("mörlunda", Question)], &v, 8)
            .unwrap()
            .sequence()
            .unwrap();
        assert_eq!(seq.tokens, [CLS, "mör", "##lunda", SEP, PAD, PAD, PAD, PAD]);
        assert_eq!(seq.labels, [-100, 3, -100, -100, -100, -100, -100, -100]);
        assert_eq!(seq.attention_mask, [1, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(seq.word_starts, [1]);
        assert_eq!(seq.sep_position(), 3);
    }

    #[test]
    fn encode_empty_label_is_zero() {
        let v = vocab(&["de"]);
        let seq = encode_compound(&[LabeledWord::new("de", Empty)], &v, DEFAULT_MAX_LEN)
            .unwrap()
            .sequence()
            .unwrap();
        assert_eq!(&seq.labels[..3], &[-100, 0, -100]);
        assert_eq!(seq.len(), 512);
    }

    #[test]
    fn encode_budget_boundary() {
        let v = vocab(&["a"]);
        let words = |n: usize| vec![LabeledWord::new("a", Empty); n];
        // 510 pieces + CLS + SEP fill the budget exactly
        assert!(matches!(encode_compound(&words(510), &v, 512).unwrap(), Encoded::Sequence(_)));
        assert_eq!(
            encode_compound(&words(511), &v, 512).unwrap(),
            Encoded::Dropped { positions: 513 }
        );
    }

    #[test]
    fn encode_rejects_empty_compound() {
        let v = vocab(&[]);
        assert!(matches!(encode_compound(&[], &v, 16), Err(Error::Argument(_))));
    }

    #[test]
    fn apply_tags_examples() {
        assert_eq!(apply_tags(&["hej", "då"], &[Empty, Period]).unwrap(), "hej då.");
        assert_eq!(
            apply_tags(
                &["susan", "where", "is", "the", "national", "library"],
                &[Comma, Empty, Empty, Empty, Empty, Question]
            )
            .unwrap(),
            "susan, where is the national library?"
        );
        assert_eq!(apply_tags::<&str>(&[], &[]).unwrap(), "");
        assert!(matches!(apply_tags(&["a"], &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn dump_columns() {
        let v = vocab(&["de"]);
        let seq = encode_compound(&[LabeledWord::new("de", Period)], &v, 4)
            .unwrap()
            .sequence()
            .unwrap();
        let mut buf = Vec::new();
        write_encoded_dump(&mut buf, &seq).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "[CLS]\t2\t-100\t1\nde\t4\t1\t1\n[SEP]\t3\t-100\t1\n[PAD]\t0\t-100\t0\n"
        );
    }
}
