//! On-disk formats for the corpus stage.
//!
//! * input corpus: a directory of UTF-8 `.txt` files, one document each, the
//!   file stem being the document id;
//! * labeled output: TSV, `word<TAB>LABEL` per line, blank line between
//!   sentences;
//! * stats: a plain-text breakdown table and a JSON counts object.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{ClassCounts, Dataset, Document, LabeledWord, RawDocument, Sentence};
use crate::error::{Error, Result};
use crate::label::PunctClass;

pub fn decode_utf8(source_name: &str, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::Ingest {
        source_name: source_name.to_string(),
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Lists files in `dir` with the given extension, sorted by file name.
pub fn list_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == extension) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_corpus_dir(dir: &Path) -> Result<Vec<RawDocument>> {
    list_files(dir, "txt")?
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let text = decode_utf8(&path.display().to_string(), bytes)?;
            Ok(RawDocument {
                id: file_stem(&path),
                text,
            })
        })
        .collect()
}

pub fn write_labels<W: Write>(mut w: W, sentences: &[Sentence]) -> std::io::Result<()> {
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for word in &s.words {
            writeln!(w, "{}\t{}", word.word, word.label)?;
        }
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R, source_name: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
            continue;
        }
        let (word, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, i + 1, "expected word<TAB>label"))?;
        if word.is_empty() {
            return Err(Error::parse(source_name, i + 1, "empty word"));
        }
        let label: PunctClass = label.parse().map_err(|m: String| Error::parse(source_name, i + 1, m))?;
        current.push(LabeledWord::new(word, label));
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    Ok(sentences)
}

pub fn read_labels_file(path: &Path) -> Result<Document> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let sentences = read_labels(BufReader::new(file), &path.display().to_string())?;
    Ok(Document {
        id: file_stem(path),
        sentences,
    })
}

/// Loads every `.tsv` file in `dir` as one document, in file-name order.
pub fn read_labels_dir(dir: &Path) -> Result<Dataset> {
    let docs = list_files(dir, "tsv")?
        .iter()
        .map(|p| read_labels_file(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(docs))
}

/// One column of the data-set breakdown table.
#[derive(Clone, Debug)]
pub struct BreakdownColumn {
    pub name: String,
    pub documents: usize,
    pub counts: ClassCounts,
}

pub fn render_breakdown(columns: &[BreakdownColumn]) -> String {
    let mut rows: Vec<Vec<String>> = vec![std::iter::once("Data set".to_string())
        .chain(columns.iter().map(|c| c.name.clone()))
        .collect()];
    let mut row = |label: &str, f: &dyn Fn(&BreakdownColumn) -> String| {
        rows.push(
            std::iter::once(label.to_string())
                .chain(columns.iter().map(f))
                .collect(),
        );
    };
    row("# of documents", &|c| c.documents.to_string());
    row("# words", &|c| thousands(c.counts.words));
    row("# PERIOD", &|c| thousands(c.counts.period));
    row("# COMMA", &|c| thousands(c.counts.comma));
    row("# QUESTION", &|c| thousands(c.counts.question));
    row("# EMPTY", &|c| thousands(c.counts.empty));

    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        }
    }
    out
}

/// Formats with a comma every three digits, as in `371,973`.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_labels_from_text;

    #[test]
    fn invalid_utf8_names_offset() {
        let err = decode_utf8("doc", b"abc\xffdef".to_vec()).unwrap_err();
        match err {
            Error::Ingest { offset, .. } => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_tsv_round_trip() {
        let sentences = extract_labels_from_text("susan, where is it? hej då. ja").sentences;
        let mut buf = Vec::new();
        write_labels(&mut buf, &sentences).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("susan\tCOMMA\nwhere\tEMPTY\n"));
        assert!(text.contains("it\tQUESTION\n\nhej\tEMPTY\n"));
        assert_eq!(read_labels(&buf[..], "mem").unwrap(), sentences);
    }

    #[test]
    fn bad_label_is_a_parse_error() {
        let err = read_labels(&b"hej\tCOLON\n"[..], "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn thousands_separator() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(44), "44");
        assert_eq!(thousands(3894), "3,894");
        assert_eq!(thousands(371_973), "371,973");
        assert_eq!(thousands(1_257_713), "1,257,713");
    }

    #[test]
    fn breakdown_table_layout() {
        let table = render_breakdown(&[BreakdownColumn {
            name: "Full set".into(),
            documents: 301,
            counts: ClassCounts {
                words: 371_973,
                period: 19_822,
                comma: 10_911,
                question: 44,
                empty: 341_196,
            },
        }]);
        assert!(table.contains("| # words        | 371,973  |"), "{table}");
        assert!(table.contains("| # QUESTION     | 44       |"), "{table}");
    }
}
